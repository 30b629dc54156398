//! A complete meter in lab A picks up a particle prepared in a distant lab B.
//!
//! For every pair of modes the expectation of the additive observable on
//! `a†_k a†_l |0>` is `o_k + o_l`; nothing about the distance enters.

use imlab::fock::{additive_fock_observable, fock_expectation, two_particle_state, FockSpace};
use imlab::multiparticle::Statistics;

fn main() -> imlab::Result<()> {
    let o = [1.0, 2.0, 3.0, 4.0];
    for stats in Statistics::both() {
        let space = FockSpace::new(o.len(), stats, 2)?;
        let obs = additive_fock_observable(&space, &o)?;
        println!("{stats:?}");
        for k in 0..o.len() {
            for l in (k + 1)..o.len() {
                let state = two_particle_state(&space, k, l)?;
                let e = fock_expectation(&state, &obs)?;
                println!(
                    "  lab A mode {k}, lab B mode {l}: <O> = {e:.12} (o_k + o_l = {})",
                    o[k] + o[l]
                );
            }
        }
    }
    Ok(())
}
