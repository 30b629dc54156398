//! Environment-times-system versus fully symmetrized descriptions: recovery,
//! normalization and agreement of registration probabilities.

use imlab::descriptions::{born_equivalence_report, first_way, recover_first, second_way};
use imlab::linalg::overlap_modulus;
use imlab::multiparticle::Statistics;
use imlab::random::{random_separated_instance, trial_rng};

fn main() -> imlab::Result<()> {
    for stats in Statistics::both() {
        for particles in 1..=2 {
            let inst = random_separated_instance(4, particles, stats, &mut trial_rng(3, particles as u64))?;
            let fw = first_way(&inst.env, &inst.psi, stats)?;
            let sw = second_way(&inst.env, &inst.psi, stats)?;
            let (recovered, nu) = recover_first(&sw, &inst.psi)?;
            let overlap = overlap_modulus(recovered.joint().amplitudes(), fw.joint().amplitudes());
            let report = born_equivalence_report(&inst.env, &inst.psi, &inst.meter, stats)?;
            println!(
                "{stats:?}, N = {particles}: N' = {:.12} (1/sqrt(N+1) = {:.12}), nu = {nu:.6}, overlap = {overlap:.12}, max deviation = {:.1e}",
                sw.cyclic_coefficient(),
                1.0 / ((particles + 1) as f64).sqrt(),
                report.max_deviation
            );
        }
    }
    Ok(())
}
