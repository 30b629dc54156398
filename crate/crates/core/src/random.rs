//! Seeded random instances for sweeps and property tests.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{orthonormal_columns, CMatrix, CVector, HermitianObservable, HilbertSpace, StateVector, C64};
use crate::meter::{build_meter, Meter, Registered};
use crate::multiparticle::{
    compose, digits, permutations, product_dim, symmetrize, MultiState, Statistics, SymmetrySector,
};

/// Independent generator for trial `index` of a sweep seeded with `master`.
pub fn trial_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

fn gaussian(rng: &mut impl Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn random_vector(dim: usize, rng: &mut impl Rng) -> CVector {
    CVector::from_fn(dim, |_, _| gaussian(rng))
}

/// Haar-distributed pure state.
pub fn random_state(space: &HilbertSpace, rng: &mut impl Rng) -> StateVector {
    let v = random_vector(space.dim(), rng);
    StateVector::normalized(space, v).expect("a Gaussian vector is nonzero almost surely")
}

pub fn random_hermitian(dim: usize, rng: &mut impl Rng) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

/// Columns form an orthonormal basis (Gram-Schmidt on a Ginibre matrix).
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> CMatrix {
    loop {
        let g = CMatrix::from_fn(dim, dim, |_, _| gaussian(rng));
        let cols = orthonormal_columns(&g, 1e-8);
        if cols.len() == dim {
            return CMatrix::from_columns(&cols);
        }
    }
}

/// A random separated configuration: an environment of `particles` particles
/// in a random subspace, a prepared state and a meter registering exactly the
/// orthogonal complement of that subspace.
#[derive(Clone, Debug)]
pub struct SeparatedInstance {
    pub space: HilbertSpace,
    pub statistics: Statistics,
    pub env: MultiState,
    pub psi: StateVector,
    pub meter: Meter,
    /// Dimension of the subspace holding the environment.
    pub env_dim: usize,
}

pub fn random_separated_instance(
    dim: usize,
    particles: usize,
    statistics: Statistics,
    rng: &mut impl Rng,
) -> Result<SeparatedInstance> {
    let min_env = match statistics {
        Statistics::Boson => 1,
        Statistics::Fermion => particles,
    };
    if particles == 0 || dim < min_env + 1 {
        return Err(Error::InvalidParameter(format!(
            "no separated {statistics:?} instance with {particles} environment particles at d = {dim}"
        )));
    }
    let space = HilbertSpace::new(dim)?;
    let u = random_unitary(dim, rng);
    let env_dim = rng.random_range(min_env..dim);
    let env_cols: Vec<CVector> = (0..env_dim).map(|j| u.column(j).into_owned()).collect();

    // random coefficients over the environment subspace, then tau-symmetrized
    let sector = SymmetrySector::new(statistics, particles, &space)?;
    let env = loop {
        let mut raw = CVector::zeros(product_dim(dim, particles));
        for idx in 0..product_dim(env_dim, particles) {
            let c = gaussian(rng);
            let mut term = CVector::from_element(1, C64::new(1.0, 0.0));
            for j in digits(idx, env_dim, particles) {
                term = term.kronecker(&env_cols[j]);
            }
            raw += term * c;
        }
        let sym = symmetrize(&raw, dim, particles, statistics);
        if sym.norm() > 1e-6 {
            break MultiState::normalized_in_sector(&sector, sym)?;
        }
    };

    let mut psi = CVector::zeros(dim);
    for j in env_dim..dim {
        psi += u.column(j) * gaussian(rng);
    }
    let psi = StateVector::normalized(&space, psi)?;

    // distinct eigenvalues in the random basis; H_ss spanned by the last columns
    let mut values: Vec<f64> = (0..dim).map(|k| k as f64 + rng.random_range(0.1..0.9)).collect();
    values.rotate_left(rng.random_range(0..dim));
    let diag = CMatrix::from_diagonal(&CVector::from_iterator(dim, values.iter().map(|&v| C64::new(v, 0.0))));
    let o = &u * diag * u.adjoint();
    let o = HermitianObservable::new(&space, (&o + o.adjoint()) * C64::new(0.5, 0.0))?;
    let mut pi_ss = CMatrix::zeros(dim, dim);
    for j in env_dim..dim {
        let c = u.column(j);
        pi_ss += c * c.adjoint();
    }
    let pi_ss = (&pi_ss + pi_ss.adjoint()) * C64::new(0.5, 0.0);
    let meter = build_meter("random", &o, Registered::Subspace(pi_ss))?;
    Ok(SeparatedInstance {
        space,
        statistics,
        env,
        psi,
        meter,
        env_dim,
    })
}

/// Random Hermitian operator on `slots` copies that commutes with every slot
/// permutation and with `P^(k)` for every slot `k`.
///
/// A random Hermitian matrix is compressed onto each block
/// `⊗_k (P or 1 - P)`, then averaged over slot-permutation conjugations.
pub fn random_admissible_hamiltonian(projector: &CMatrix, slots: usize, rng: &mut impl Rng) -> CMatrix {
    let d = projector.nrows();
    let dim = product_dim(d, slots);
    let g = random_hermitian(dim, rng);
    let complement = crate::linalg::identity(d) - projector;
    let mut blocked = CMatrix::zeros(dim, dim);
    for mask in 0..(1usize << slots) {
        let mut q = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for k in 0..slots {
            let f = if (mask >> (slots - 1 - k)) & 1 == 1 {
                projector
            } else {
                &complement
            };
            q = q.kronecker(f);
        }
        blocked += &q * &g * &q;
    }
    let perms = permutations(slots);
    let mut sym = CMatrix::zeros(dim, dim);
    for (sigma, _) in &perms {
        let p = CMatrix::from_fn(dim, dim, |r, c| {
            // (P v)(i) = v(i_sigma): row r picks column compose(i_sigma)
            let dr = digits(r, d, slots);
            let src: Vec<usize> = sigma.iter().map(|&s| dr[s]).collect();
            if compose(&src, d) == c {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        sym += &p * &blocked * p.adjoint();
    }
    let h = sym.unscale(perms.len() as f64);
    (&h + h.adjoint()) * C64::new(0.5, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, max_norm};
    use crate::multiparticle::{commutator_norm, embed_op, symmetrizer_matrix};
    use crate::separation::{contraction_residual, EnvironmentObject};

    #[test]
    fn trial_streams_are_reproducible_and_distinct() {
        let a: u64 = trial_rng(7, 3).random();
        let b: u64 = trial_rng(7, 3).random();
        let c: u64 = trial_rng(7, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn unitary_is_unitary() {
        let mut rng = trial_rng(1, 0);
        let u = random_unitary(5, &mut rng);
        assert!(max_norm(&(u.adjoint() * &u - identity(5))) < 1e-12);
    }

    #[test]
    fn separated_instances_are_separated() {
        let mut rng = trial_rng(11, 0);
        for stats in Statistics::both() {
            for n in 1..=2 {
                for d in (n + 1)..=4 {
                    let inst = random_separated_instance(d, n, stats, &mut rng).unwrap();
                    let obj = EnvironmentObject::from_pure("env", stats, &inst.env).unwrap();
                    assert!(contraction_residual(&obj, &inst.psi).unwrap() < 1e-10);
                    let pi = inst.meter.pi_ss().matrix();
                    assert!(crate::linalg::vec_max_norm(&(pi * inst.psi.amplitudes() - inst.psi.amplitudes())) < 1e-10);
                    assert!(max_norm(&(pi * inst.env.one_body_density())) < 1e-10);
                    assert!(commutator_norm(pi, inst.meter.observable().matrix()) < 1e-10);
                }
            }
        }
        assert!(random_separated_instance(2, 2, Statistics::Fermion, &mut rng).is_err());
    }

    #[test]
    fn admissible_hamiltonian_commutes() {
        let mut rng = trial_rng(5, 0);
        let p = crate::linalg::diagonal(&[0.0, 1.0, 1.0]);
        let h = random_admissible_hamiltonian(&p, 2, &mut rng);
        for stats in Statistics::both() {
            assert!(commutator_norm(&h, &symmetrizer_matrix(3, 2, stats)) < 1e-12);
        }
        for k in 0..2 {
            assert!(commutator_norm(&h, embed_op(&p, k, 2).unwrap().matrix()) < 1e-12);
        }
        assert!(max_norm(&h) > 0.1);
    }
}
