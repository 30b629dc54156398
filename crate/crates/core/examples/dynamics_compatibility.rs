//! Joint evolution in both descriptions: an admissible Hamiltonian keeps them
//! in step, a hopping term into the environment mode does not.

use imlab::dynamics::{compatibility_report, Hamiltonian};
use imlab::linalg::{real_matrix, HermitianObservable, HilbertSpace, StateVector};
use imlab::meter::{build_meter, Registered};
use imlab::multiparticle::{MultiState, Statistics};
use imlab::random::{random_admissible_hamiltonian, trial_rng};

fn main() -> imlab::Result<()> {
    let space = HilbertSpace::new(3)?;
    let stats = Statistics::Boson;
    let env = MultiState::from(&StateVector::basis(&space, 0)?);
    let psi = StateVector::from_real(&space, &[0.0, 0.6, 0.8])?;
    let obs = HermitianObservable::diagonal(&space, &[1.0, 2.0, 3.0])?;
    let meter = build_meter("upper levels", &obs, Registered::EigenIndices(vec![1, 2]))?;
    let pi = meter.pi_ss().matrix().clone();
    let times: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();

    let admissible = Hamiltonian::new(
        random_admissible_hamiltonian(&pi, 2, &mut trial_rng(5, 0)),
        3,
        2,
        stats,
        &pi,
    )?;
    let hopping = Hamiltonian::additive(
        &real_matrix(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        2,
        stats,
        &pi,
    )?;
    for (label, h) in [("admissible", admissible), ("hopping", hopping)] {
        let report = compatibility_report(&h, &env, &psi, &meter, &times)?;
        println!(
            "{label}: max deviation {:.3e}, hypothesis violated {}",
            report.max_deviation, report.hypothesis_violated
        );
        print!("{}", report.to_csv());
    }
    Ok(())
}
