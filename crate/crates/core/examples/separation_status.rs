//! Checking whether a prepared particle is separated from every object in its
//! environment, and what happens after a change of basis.

use imlab::linalg::{HilbertSpace, StateVector};
use imlab::multiparticle::Statistics;
use imlab::random::{random_unitary, trial_rng};
use imlab::separation::{has_separation_status, product_environment, DEFAULT_TOL};

fn main() -> imlab::Result<()> {
    let space = HilbertSpace::new(3)?;
    let psi = StateVector::basis(&space, 1)?;
    let lonely = product_environment(&space, Statistics::Boson, &[("atom", vec![0])])?;
    let crowded = product_environment(&space, Statistics::Boson, &[("atom", vec![0]), ("pair", vec![1, 2])])?;
    for (label, env) in [("atom only", &lonely), ("atom and pair", &crowded)] {
        let r = has_separation_status(&psi, env, DEFAULT_TOL)?;
        println!("{label}: {}", r.summary());
    }

    let u = random_unitary(3, &mut trial_rng(1, 0));
    let rotated = StateVector::normalized(&space, &u * psi.amplitudes())?;
    let r = has_separation_status(&rotated, &crowded.transformed(&u)?, DEFAULT_TOL)?;
    println!("rotated basis: {}", r.summary());
    Ok(())
}
