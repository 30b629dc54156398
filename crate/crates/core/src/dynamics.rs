//! Unitary evolution of the two descriptions and the commutation conditions
//! under which they stay compatible. Units with `hbar = 1`; propagators are
//! exact spectral exponentials.

use rayon::prelude::*;
use serde::Serialize;

use crate::descriptions::{first_way, second_way};
use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_eigen, hermiticity_defect, max_norm, overlap_modulus, tol, CMatrix, CVector, StateVector, C64,
};
use crate::meter::Meter;
use crate::multiparticle::{embed_op, product_dim, symmetrizer_matrix, MultiState, Statistics};
use crate::report::fmt_f64;

pub const COMMUTE_TOL: f64 = 1e-10;

/// `(|AB - BA|_max < tol, |AB - BA|_max)`.
pub fn commutes(a: &CMatrix, b: &CMatrix, tol: f64) -> Result<(bool, f64)> {
    if a.shape() != b.shape() || !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    let deviation = max_norm(&(a * b - b * a));
    Ok((deviation < tol, deviation))
}

/// `exp(-i H t)` through a cached eigendecomposition.
#[derive(Clone, Debug)]
pub struct Propagator {
    energies: Vec<f64>,
    vectors: CMatrix,
}

impl Propagator {
    pub fn new(h: &CMatrix) -> Self {
        let (energies, vectors) = hermitian_eigen(h);
        Self { energies, vectors }
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn unitary(&self, t: f64) -> CMatrix {
        let phases = CVector::from_iterator(self.dim(), self.energies.iter().map(|&e| C64::from_polar(1.0, -e * t)));
        let scaled = CMatrix::from_fn(self.dim(), self.dim(), |r, c| self.vectors[(r, c)] * phases[c]);
        scaled * self.vectors.adjoint()
    }

    pub fn apply(&self, v: &CVector, t: f64) -> CVector {
        let coeff = self.vectors.adjoint() * v;
        let rotated = CVector::from_iterator(
            self.dim(),
            coeff
                .iter()
                .zip(&self.energies)
                .map(|(c, &e)| c * C64::from_polar(1.0, -e * t)),
        );
        &self.vectors * rotated
    }
}

/// Commutator deviations of a Hamiltonian against the structures it should respect.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HamiltonianFlags {
    pub symmetrizer_deviation: f64,
    /// `|[H, Pi_ss^(k)]|_max` for each slot `k`.
    pub status_deviations: Vec<f64>,
    pub commutes_with_symmetrizer: bool,
    pub commutes_with_status_projectors: bool,
}

/// A Hamiltonian on `slots` copies of a `single_dim`-dimensional space, with
/// its propagator and commutation flags computed once.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    matrix: CMatrix,
    single_dim: usize,
    slots: usize,
    statistics: Statistics,
    flags: HamiltonianFlags,
    propagator: Propagator,
}

impl Hamiltonian {
    pub fn new(
        matrix: CMatrix,
        single_dim: usize,
        slots: usize,
        statistics: Statistics,
        pi_ss: &CMatrix,
    ) -> Result<Self> {
        let dim = product_dim(single_dim, slots);
        if matrix.nrows() != dim || !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.nrows(),
            });
        }
        if pi_ss.nrows() != single_dim {
            return Err(Error::DimensionMismatch {
                expected: single_dim,
                found: pi_ss.nrows(),
            });
        }
        let deviation = hermiticity_defect(&matrix);
        if deviation > tol::HERMITIAN {
            return Err(Error::NotHermitian { deviation });
        }
        let (_, symmetrizer_deviation) =
            commutes(&matrix, &symmetrizer_matrix(single_dim, slots, statistics), COMMUTE_TOL)?;
        let status_deviations = (0..slots)
            .map(|k| Ok(commutes(&matrix, embed_op(pi_ss, k, slots)?.matrix(), COMMUTE_TOL)?.1))
            .collect::<Result<Vec<f64>>>()?;
        let flags = HamiltonianFlags {
            symmetrizer_deviation,
            commutes_with_symmetrizer: symmetrizer_deviation < COMMUTE_TOL,
            commutes_with_status_projectors: status_deviations.iter().all(|&d| d < COMMUTE_TOL),
            status_deviations,
        };
        let propagator = Propagator::new(&matrix);
        Ok(Self {
            matrix,
            single_dim,
            slots,
            statistics,
            flags,
            propagator,
        })
    }

    /// `sum_l h^(l)` over all slots.
    pub fn additive(h: &CMatrix, slots: usize, statistics: Statistics, pi_ss: &CMatrix) -> Result<Self> {
        let m = crate::multiparticle::additive_embed(h, slots)?.into_matrix();
        Self::new(m, h.nrows(), slots, statistics, pi_ss)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn single_dim(&self) -> usize {
        self.single_dim
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn flags(&self) -> &HamiltonianFlags {
        &self.flags
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }
}

/// `exp(-i H t) state`.
pub fn evolve(h: &Hamiltonian, state: &CVector, t: f64) -> Result<CVector> {
    if state.len() != h.propagator.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.propagator.dim(),
            found: state.len(),
        });
    }
    Ok(h.propagator.apply(state, t))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompatibilityRow {
    pub t: f64,
    pub deviation: f64,
    pub status_preserved: bool,
    /// `max_k |<Pi_ss^(k)>_t - <Pi_ss^(k)>_0|` on the first-way trajectory.
    pub status_drift: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompatibilityReport {
    pub rows: Vec<CompatibilityRow>,
    pub flags: HamiltonianFlags,
    pub hypothesis_violated: bool,
    pub max_deviation: f64,
}

impl CompatibilityReport {
    /// `t,deviation,status_preserved`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,deviation,status_preserved\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_f64(r.t),
                fmt_f64(r.deviation),
                r.status_preserved
            ));
        }
        out
    }
}

const DRIFT_TOL: f64 = 1e-9;

fn slot_expectations(v: &CVector, projectors: &[CMatrix]) -> Vec<f64> {
    projectors.iter().map(|p| v.dotc(&(p * v)).re).collect()
}

/// For each time, evolves `Psi ⊗ psi` under `H` and `S(Psi ⊗ psi)` under
/// `S H S`, then recovers the system from the second by projecting the last
/// slot onto `H_ss`. The deviation is `1 - |<recovered, first way>|`.
///
/// The exact `psi_t` is unknown to the second description, so recovery uses
/// the registered subspace; at `t = 0` this coincides with projecting onto
/// `psi` whenever the environment lies outside `H_ss`.
pub fn compatibility_report(
    h: &Hamiltonian,
    env: &MultiState,
    psi: &StateVector,
    meter: &Meter,
    times: &[f64],
) -> Result<CompatibilityReport> {
    let slots = env.particles() + 1;
    if h.slots != slots || h.single_dim != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: product_dim(psi.dim(), slots),
            found: h.matrix.nrows(),
        });
    }
    let stats = h.statistics;
    let fw = first_way(env, psi, stats)?;
    let sw = second_way(env, psi, stats)?;
    let s = symmetrizer_matrix(h.single_dim, slots, stats);
    let second = Propagator::new(&(&s * &h.matrix * &s));
    let pi_ss = meter.pi_ss().matrix();
    let slot_projectors = (0..slots)
        .map(|k| Ok(embed_op(pi_ss, k, slots)?.into_matrix()))
        .collect::<Result<Vec<_>>>()?;
    let recovery = &slot_projectors[slots - 1];
    let initial = slot_expectations(fw.joint().amplitudes(), &slot_projectors);

    let rows = times
        .par_iter()
        .map(|&t| {
            let first = h.propagator.apply(fw.joint().amplitudes(), t);
            let evolved = second.apply(sw.amplitudes(), t);
            let projected = recovery * evolved;
            let norm = projected.norm();
            if norm < 1e-12 {
                return Err(Error::RecoveryDegenerate { norm });
            }
            let deviation = (1.0 - overlap_modulus(&projected.unscale(norm), &first)).max(0.0);
            let drift = slot_expectations(&first, &slot_projectors)
                .iter()
                .zip(&initial)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok(CompatibilityRow {
                t,
                deviation,
                status_preserved: drift < DRIFT_TOL,
                status_drift: drift,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_deviation = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
    Ok(CompatibilityReport {
        rows,
        hypothesis_violated: !h.flags.commutes_with_symmetrizer,
        flags: h.flags.clone(),
        max_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diagonal, identity, HermitianObservable, HilbertSpace};
    use crate::meter::{build_meter, Registered};
    use crate::multiparticle::{symmetry_defect, tensor_and_symmetrize};
    use crate::random::{random_admissible_hamiltonian, random_hermitian, trial_rng};

    fn meter3() -> Meter {
        let s = HilbertSpace::new(3).unwrap();
        let o = HermitianObservable::diagonal(&s, &[1.0, 2.0, 3.0]).unwrap();
        build_meter("m", &o, Registered::EigenIndices(vec![1, 2])).unwrap()
    }

    fn env_e1() -> (HilbertSpace, MultiState) {
        let s = HilbertSpace::new(3).unwrap();
        let e1 = StateVector::basis(&s, 0).unwrap();
        (s, MultiState::from(&e1))
    }

    #[test]
    fn commutes_examples() {
        let (ok, dev) = commutes(&diagonal(&[1.0, 2.0]), &diagonal(&[3.0, -1.0]), COMMUTE_TOL).unwrap();
        assert!(ok && dev == 0.0);
        let x = crate::linalg::real_matrix(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        let z = diagonal(&[1.0, -1.0]);
        let (ok, dev) = commutes(&x, &z, COMMUTE_TOL).unwrap();
        // [X, Z] has entries +-2 * 0.5 * 1
        assert!(!ok && (dev - 1.0).abs() < 1e-15);
        assert!(commutes(&x, &identity(3), COMMUTE_TOL).is_err());
    }

    #[test]
    fn evolve_examples() {
        let p = meter3().pi_ss().matrix().clone();
        let h = Hamiltonian::new(diagonal(&[0.5, 1.5, -2.0]), 3, 1, Statistics::Boson, &p).unwrap();
        let e = StateVector::basis(&HilbertSpace::new(3).unwrap(), 2).unwrap();
        let v0 = evolve(&h, e.amplitudes(), 0.0).unwrap();
        assert!((v0 - e.amplitudes()).norm() < 1e-15);
        let v = evolve(&h, e.amplitudes(), 0.7).unwrap();
        assert!((v[2] - C64::from_polar(1.0, 1.4)).norm() < 1e-14);
        assert!((v[2].norm() - 1.0).abs() < 1e-14);

        let mut rng = trial_rng(3, 0);
        let g = random_hermitian(6, &mut rng);
        let h = Hamiltonian::new(g.clone(), 6, 1, Statistics::Boson, &identity(6)).unwrap();
        let oracle = (g * C64::new(0.0, -0.3)).exp();
        for j in 0..6 {
            let v = CVector::from_fn(6, |i, _| C64::new(((i * 7 + j) % 5) as f64, (i % 2) as f64));
            let half = evolve(&h, &evolve(&h, &v, 0.15).unwrap(), 0.15).unwrap();
            assert!(crate::linalg::vec_max_norm(&(&half - &oracle * &v)) < 1e-10);
            assert!((half.norm() - v.norm()).abs() < 1e-10 * v.norm());
        }
        assert!(max_norm(&(h.propagator().unitary(0.3) - oracle)) < 1e-10);
    }

    #[test]
    fn additive_hamiltonian_commutes_with_symmetrizer() {
        let mut rng = trial_rng(4, 0);
        let hs = random_hermitian(3, &mut rng);
        for stats in Statistics::both() {
            let h = Hamiltonian::additive(&hs, 3, stats, &identity(3)).unwrap();
            assert!(h.flags().symmetrizer_deviation < 1e-12);
        }
    }

    #[test]
    fn symmetric_sector_preserved() {
        let mut rng = trial_rng(8, 0);
        let h = Hamiltonian::additive(&random_hermitian(3, &mut rng), 2, Statistics::Fermion, &identity(3)).unwrap();
        let s = HilbertSpace::new(3).unwrap();
        let a = MultiState::from(&StateVector::basis(&s, 0).unwrap());
        let b = MultiState::from(&StateVector::from_real(&s, &[0.0, 1.0, 1.0]).unwrap());
        let (v, _) = tensor_and_symmetrize(&[&a, &b], Statistics::Fermion).unwrap();
        for t in [0.1, 0.5, 1.0] {
            let w = evolve(&h, v.amplitudes(), t).unwrap();
            assert!(symmetry_defect(&w, 3, 2, Statistics::Fermion) < 1e-10);
        }
    }

    #[test]
    fn compatible_when_status_projectors_commute() {
        let m = meter3();
        let p = m.pi_ss().matrix().clone();
        let (s, env) = env_e1();
        let psi = StateVector::from_real(&s, &[0.0, 0.6, 0.8]).unwrap();
        // [h, Pi_ss] = 0: block diagonal with respect to {e1} + {e2, e3}
        let h1 = crate::linalg::real_matrix(3, 3, &[0.3, 0.0, 0.0, 0.0, 1.0, 0.4, 0.0, 0.4, -0.2]);
        let times = [0.1, 0.5, 1.0];
        for stats in Statistics::both() {
            let h = Hamiltonian::additive(&h1, 2, stats, &p).unwrap();
            assert!(h.flags().commutes_with_status_projectors);
            let r = compatibility_report(&h, &env, &psi, &m, &times).unwrap();
            assert!(r.max_deviation < 1e-8, "{stats:?} {}", r.max_deviation);
            assert!(r.rows.iter().all(|row| row.status_preserved));

            let zero = Hamiltonian::new(CMatrix::zeros(9, 9), 3, 2, stats, &p).unwrap();
            let r = compatibility_report(&zero, &env, &psi, &m, &times).unwrap();
            assert!(r.max_deviation < 1e-15);
        }
    }

    #[test]
    fn random_admissible_trajectory_is_compatible() {
        let m = meter3();
        let p = m.pi_ss().matrix().clone();
        let (s, env) = env_e1();
        let mut rng = trial_rng(10, 0);
        let psi = crate::random::random_state(&s, &mut rng);
        let psi = StateVector::normalized(&s, &p * psi.amplitudes()).unwrap();
        let times: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
        for stats in Statistics::both() {
            let h = Hamiltonian::new(random_admissible_hamiltonian(&p, 2, &mut rng), 3, 2, stats, &p).unwrap();
            assert!(h.flags().commutes_with_symmetrizer && h.flags().commutes_with_status_projectors);
            let r = compatibility_report(&h, &env, &psi, &m, &times).unwrap();
            assert!(r.max_deviation < 1e-8);
            assert!(r.rows.iter().all(|row| row.status_drift < 1e-9));
        }
    }

    #[test]
    fn coupling_across_registered_subspace_breaks_status() {
        let m = meter3();
        let p = m.pi_ss().matrix().clone();
        let (s, env) = env_e1();
        let psi = StateVector::basis(&s, 1).unwrap();
        let h1 = crate::linalg::real_matrix(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let h = Hamiltonian::additive(&h1, 2, Statistics::Boson, &p).unwrap();
        assert!(!h.flags().commutes_with_status_projectors && h.flags().commutes_with_symmetrizer);
        let r = compatibility_report(&h, &env, &psi, &m, &[0.25, 0.5, 1.0]).unwrap();
        assert!(r.max_deviation > 0.01);
        assert!(r.rows.iter().any(|row| !row.status_preserved));
        assert!(r.to_csv().starts_with("t,deviation,status_preserved\n"));
    }
}
