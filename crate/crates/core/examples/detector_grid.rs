//! A position meter built from two sub-detectors on a 64-cell line.
//!
//! A state living between the detectors is never registered: the meter
//! reports `no_response` on every shot.

use imlab::linalg::{CVector, DensityOperator, HilbertSpace, StateVector, C64};
use imlab::meter::{registered_distribution, sample_registrations};
use imlab::scenario::grid_meter;

fn flat_state(space: &HilbertSpace, from: usize, to: usize) -> imlab::Result<StateVector> {
    let v = CVector::from_fn(space.dim(), |i, _| {
        C64::new(if (from..to).contains(&i) { 1.0 } else { 0.0 }, 0.0)
    });
    StateVector::normalized(space, v)
}

fn main() -> imlab::Result<()> {
    let meter = grid_meter(64, &[[0, 16], [32, 48]])?;
    let space = HilbertSpace::new(64)?;
    for (label, from, to) in [("inside D1", 4, 12), ("between", 20, 28), ("straddling", 12, 36)] {
        let rho = DensityOperator::from_pure(&flat_state(&space, from, to)?);
        let dist = registered_distribution(&meter, &rho)?;
        let record = sample_registrations(&meter, &rho, 10_000, 7)?;
        println!(
            "{label}: P(D1) = {:.3}, P(D2) = {:.3}, no_response = {:.3}",
            dist.outcomes[0].probability, dist.outcomes[1].probability, dist.no_response
        );
        print!("{}", record.to_csv());
    }
    Ok(())
}
