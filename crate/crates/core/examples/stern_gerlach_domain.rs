//! A domain that is not a subspace: states with little weight in a forbidden
//! region are admitted, but superpositions of two admitted states need not be.

use imlab::linalg::{HilbertSpace, StateVector, C64};
use imlab::meter::amplitude_bound_predicate;

fn main() -> imlab::Result<()> {
    let space = HilbertSpace::new(3)?;
    // cell 1 sits between the two beams
    let predicate = amplitude_bound_predicate(vec![1], 0.3)?;
    let up = StateVector::from_real(&space, &[1.0, 0.6, 0.0])?;
    let down = StateVector::from_real(&space, &[0.0, 0.6, 1.0])?;
    for (label, s) in [("up", &up), ("down", &down)] {
        println!(
            "{label}: forbidden weight {:.3}, admitted {}",
            predicate.forbidden_weight(s.amplitudes()),
            predicate.admits(s)
        );
    }
    let half = C64::new(0.5f64.sqrt(), 0.0);
    let w = predicate.combination_weight(half, &up, half, &down);
    println!(
        "(up + down)/sqrt 2: forbidden weight {w:.3}, admitted {}",
        w < predicate.eps_prime()
    );
    Ok(())
}
