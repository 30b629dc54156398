//! Truncated effects `Pi_ss Pi_k Pi_ss` of an incomplete meter sum to the
//! registered-subspace projector, not to the identity.

use imlab::linalg::{identity, max_norm, CMatrix, HermitianObservable, HilbertSpace};
use imlab::meter::{build_meter, eigen_effect, Registered};

fn main() -> imlab::Result<()> {
    let space = HilbertSpace::new(4)?;
    let obs = HermitianObservable::diagonal(&space, &[1.0, 2.0, 3.0, 4.0])?;
    for (name, registered) in [
        ("complete", Registered::Complete),
        ("first two levels", Registered::EigenIndices(vec![0, 1])),
    ] {
        let meter = build_meter(name, &obs, registered)?;
        let mut total = CMatrix::zeros(4, 4);
        for k in 0..4 {
            total += eigen_effect(&meter, k)?.matrix();
        }
        println!(
            "{name}: |sum E_k - Pi_ss| = {:.1e}, |sum E_k - 1| = {:.3}, rank Pi_ss = {}",
            max_norm(&(&total - meter.pi_ss().matrix())),
            max_norm(&(&total - identity(4))),
            meter.pi_ss().rank()
        );
    }
    Ok(())
}
