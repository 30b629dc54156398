//! Tensor powers of a single-particle space and their tau-symmetric sectors.
//!
//! Product basis vectors are ordered with slot 0 most significant, so the
//! amplitude of `e_{i_0} (x) ... (x) e_{i_{N-1}}` sits at index
//! `sum_k i_k d^{N-1-k}`, matching `nalgebra`'s Kronecker product. Slots are
//! zero-based throughout; slot `N` of an `(N+1)`-particle vector is the
//! measured system in the tensor-product description.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{identity, kron_vectors, max_norm, vec_max_norm, CMatrix, CVector, HilbertSpace, StateVector, C64};

/// Defect threshold for accepting a vector as tau-symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Exchange statistics, the sign `tau` (or `eta` in the Fock layer).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistics {
    Boson,
    Fermion,
}

impl Statistics {
    /// `+1` for bosons, `-1` for fermions.
    pub fn sign(self) -> f64 {
        match self {
            Statistics::Boson => 1.0,
            Statistics::Fermion => -1.0,
        }
    }

    /// `tau^p` for a permutation of parity `p`.
    fn weight(self, odd: bool) -> f64 {
        if odd {
            self.sign()
        } else {
            1.0
        }
    }

    pub fn both() -> [Statistics; 2] {
        [Statistics::Boson, Statistics::Fermion]
    }
}

/// `H^N_tau`: `N` indistinguishable copies of a single-particle space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetrySector {
    statistics: Statistics,
    particles: usize,
    single: HilbertSpace,
}

impl SymmetrySector {
    pub fn new(statistics: Statistics, particles: usize, single: &HilbertSpace) -> Result<Self> {
        if particles == 0 {
            return Err(Error::InvalidParameter("a sector needs at least one particle".into()));
        }
        Ok(Self {
            statistics,
            particles,
            single: single.clone(),
        })
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn single_space(&self) -> &HilbertSpace {
        &self.single
    }

    /// Dimension of the dense product carrier, `d^N`.
    pub fn product_dim(&self) -> usize {
        product_dim(self.single.dim(), self.particles)
    }

    pub fn symmetrizer(&self) -> CMatrix {
        symmetrizer_matrix(self.single.dim(), self.particles, self.statistics)
    }
}

pub fn product_dim(d: usize, n: usize) -> usize {
    d.pow(n as u32)
}

/// Slot digits of a product index, slot 0 first.
pub fn digits(mut index: usize, d: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for k in (0..n).rev() {
        out[k] = index % d;
        index /= d;
    }
    out
}

pub fn compose(digits: &[usize], d: usize) -> usize {
    digits.iter().fold(0, |acc, &i| acc * d + i)
}

/// All permutations of `0..n` with their parity (`true` when odd).
pub fn permutations(n: usize) -> Vec<(Vec<usize>, bool)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<(Vec<usize>, bool)>) {
        let n = used.len();
        if prefix.len() == n {
            let inversions = (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .filter(|&(i, j)| prefix[i] > prefix[j])
                .count();
            out.push((prefix.clone(), inversions % 2 == 1));
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// `(P_sigma v)(i_0, ..., i_{n-1}) = v(i_{sigma(0)}, ..., i_{sigma(n-1)})`.
pub fn permute_slots(v: &CVector, d: usize, n: usize, sigma: &[usize]) -> CVector {
    let mut out = CVector::zeros(v.len());
    let mut src = vec![0; n];
    for (idx, slot) in out.iter_mut().enumerate() {
        let dig = digits(idx, d, n);
        for k in 0..n {
            src[k] = dig[sigma[k]];
        }
        *slot = v[compose(&src, d)];
    }
    out
}

/// Swaps two slots.
pub fn transpose_slots(v: &CVector, d: usize, n: usize, a: usize, b: usize) -> CVector {
    let mut sigma: Vec<usize> = (0..n).collect();
    sigma.swap(a, b);
    permute_slots(v, d, n, &sigma)
}

/// `(1/n!) sum_sigma tau^sigma P_sigma v`.
pub fn symmetrize(v: &CVector, d: usize, n: usize, statistics: Statistics) -> CVector {
    let perms = permutations(n);
    let mut acc = CVector::zeros(v.len());
    for (sigma, odd) in &perms {
        acc += permute_slots(v, d, n, sigma) * C64::new(statistics.weight(*odd), 0.0);
    }
    acc / C64::new(perms.len() as f64, 0.0)
}

/// Dense matrix of the tau-symmetrizer on `(C^d)^{(x) n}`.
pub fn symmetrizer_matrix(d: usize, n: usize, statistics: Statistics) -> CMatrix {
    let dim = product_dim(d, n);
    let perms = permutations(n);
    let scale = 1.0 / perms.len() as f64;
    let mut m = CMatrix::zeros(dim, dim);
    let mut src = vec![0; n];
    for (sigma, odd) in &perms {
        let w = C64::new(statistics.weight(*odd) * scale, 0.0);
        for row in 0..dim {
            let dig = digits(row, d, n);
            for k in 0..n {
                src[k] = dig[sigma[k]];
            }
            m[(row, compose(&src, d))] += w;
        }
    }
    m
}

/// Largest violation of `P_(k,k+1) v = tau v` over adjacent transpositions.
pub fn symmetry_defect(v: &CVector, d: usize, n: usize, statistics: Statistics) -> f64 {
    (0..n.saturating_sub(1))
        .map(|k| {
            let t = transpose_slots(v, d, n, k, k + 1);
            vec_max_norm(&(t - v * C64::new(statistics.sign(), 0.0)))
        })
        .fold(0.0, f64::max)
}

/// A wave function of `N` particles stored densely over the product basis.
#[derive(Clone, Debug)]
pub struct MultiState {
    single: HilbertSpace,
    particles: usize,
    statistics: Option<Statistics>,
    amplitudes: CVector,
}

impl MultiState {
    /// Plain tensor product, no symmetry tag.
    pub fn product(factors: &[&StateVector]) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty product".into()))?;
        for f in factors {
            if f.space() != first.space() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    found: f.dim(),
                });
            }
        }
        Ok(Self {
            single: first.space().clone(),
            particles: factors.len(),
            statistics: None,
            amplitudes: kron_vectors(factors.iter().map(|f| f.amplitudes())),
        })
    }

    /// A normalized vector on the product space, untagged.
    pub fn from_amplitudes(single: &HilbertSpace, particles: usize, amplitudes: CVector) -> Result<Self> {
        let expected = product_dim(single.dim(), particles);
        if amplitudes.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > crate::linalg::tol::NORM {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self {
            single: single.clone(),
            particles,
            statistics: None,
            amplitudes,
        })
    }

    /// A normalized vector checked to lie in the given sector.
    pub fn in_sector(sector: &SymmetrySector, amplitudes: CVector) -> Result<Self> {
        let mut s = Self::from_amplitudes(sector.single_space(), sector.particles(), amplitudes)?;
        s.tag(sector.statistics())?;
        Ok(s)
    }

    /// Normalizes, then tags with the sector, checking the symmetry.
    pub fn normalized_in_sector(sector: &SymmetrySector, amplitudes: CVector) -> Result<Self> {
        let norm = amplitudes.norm();
        if norm < crate::linalg::tol::ZERO {
            return Err(Error::ZeroVector { norm });
        }
        Self::in_sector(sector, amplitudes / C64::new(norm, 0.0))
    }

    /// Tags the state with a statistics after verifying the symmetry defect.
    pub fn tag(&mut self, statistics: Statistics) -> Result<()> {
        let defect = self.symmetry_defect(statistics);
        if defect > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { defect });
        }
        self.statistics = Some(statistics);
        Ok(())
    }

    pub fn single_space(&self) -> &HilbertSpace {
        &self.single
    }

    pub fn single_dim(&self) -> usize {
        self.single.dim()
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    /// `Some(tau)` when the state was constructed in (or tagged with) a sector.
    pub fn statistics(&self) -> Option<Statistics> {
        self.statistics
    }

    pub fn sector(&self) -> Option<SymmetrySector> {
        self.statistics.map(|s| SymmetrySector {
            statistics: s,
            particles: self.particles,
            single: self.single.clone(),
        })
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn symmetry_defect(&self, statistics: Statistics) -> f64 {
        symmetry_defect(&self.amplitudes, self.single.dim(), self.particles, statistics)
    }

    /// Amplitudes with slots `a` and `b` exchanged.
    pub fn transposed(&self, a: usize, b: usize) -> Result<CVector> {
        for s in [a, b] {
            if s >= self.particles {
                return Err(Error::SlotOutOfRange {
                    slot: s,
                    particles: self.particles,
                });
            }
        }
        Ok(transpose_slots(
            &self.amplitudes,
            self.single.dim(),
            self.particles,
            a,
            b,
        ))
    }

    /// One-body reduced density matrix on slot 0, `rho(a, b) = sum_rest Psi(a, rest) Psi*(b, rest)`.
    /// For a tau-symmetric state every slot gives the same matrix.
    pub fn one_body_density(&self) -> CMatrix {
        let d = self.single.dim();
        let rest = product_dim(d, self.particles - 1);
        let mut rho = CMatrix::zeros(d, d);
        for a in 0..d {
            for b in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for r in 0..rest {
                    acc += self.amplitudes[a * rest + r] * self.amplitudes[b * rest + r].conj();
                }
                rho[(a, b)] = acc;
            }
        }
        rho
    }
}

impl From<&StateVector> for MultiState {
    fn from(s: &StateVector) -> Self {
        Self {
            single: s.space().clone(),
            particles: 1,
            statistics: None,
            amplitudes: s.amplitudes().clone(),
        }
    }
}

/// Tau-symmetrized projection of `factors[0] (x) factors[1] (x) ...`, renormalized.
///
/// Returns the normalized state and `N_exch`, the inverse of the projection's
/// norm before renormalization.
pub fn tensor_and_symmetrize(factors: &[&MultiState], statistics: Statistics) -> Result<(MultiState, f64)> {
    let first = factors
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty product".into()))?;
    let single = first.single_space().clone();
    let mut particles = 0;
    for f in factors {
        if f.single_space() != &single {
            return Err(Error::DimensionMismatch {
                expected: single.dim(),
                found: f.single_dim(),
            });
        }
        particles += f.particles();
    }
    let product = kron_vectors(factors.iter().map(|f| f.amplitudes()));
    let projected = symmetrize(&product, single.dim(), particles, statistics);
    let norm = projected.norm();
    if norm < crate::linalg::tol::ZERO {
        return Err(Error::ZeroSymmetrization { norm });
    }
    let state = MultiState {
        single,
        particles,
        statistics: Some(statistics),
        amplitudes: projected / C64::new(norm, 0.0),
    };
    Ok((state, 1.0 / norm))
}

/// `N' sum_{K} tau^{N (N-K)} Psi(lambda_{K+1}, ..., lambda_N, lambda_0, ..., lambda_{K-1}) psi(lambda_K)`
/// with `K` running over the `N+1` slots (zero-based) and `N'` chosen to normalize.
///
/// The sign is the parity of rotating `N+1` slots by `N-K` places. It reduces
/// to `tau^(N-K)` for odd `N`; for even `N` every term enters with `+1`.
///
/// Returns the state and `N'`. For a tau-symmetric `env` this equals the
/// symmetrized product `tensor_and_symmetrize([env, psi])`.
pub fn cyclic_expansion(env: &MultiState, psi: &StateVector, statistics: Statistics) -> Result<(MultiState, f64)> {
    if env.single_space() != psi.space() {
        return Err(Error::DimensionMismatch {
            expected: env.single_dim(),
            found: psi.dim(),
        });
    }
    let defect = env.symmetry_defect(statistics);
    if defect > SYMMETRY_TOL {
        return Err(Error::NotSymmetric { defect });
    }
    let d = env.single_dim();
    let n_env = env.particles();
    let n = n_env + 1;
    let mut out = CVector::zeros(product_dim(d, n));
    let mut env_digits = vec![0; n_env];
    for (idx, slot) in out.iter_mut().enumerate() {
        let dig = digits(idx, d, n);
        let mut acc = C64::new(0.0, 0.0);
        for k in 0..n {
            for (j, e) in env_digits.iter_mut().enumerate() {
                *e = dig[(k + 1 + j) % n];
            }
            let sign = if (n_env * (n_env - k)) % 2 == 1 {
                statistics.sign()
            } else {
                1.0
            };
            acc += env.amplitudes()[compose(&env_digits, d)] * psi.amplitudes()[dig[k]] * sign;
        }
        *slot = acc;
    }
    let norm = out.norm();
    if norm < crate::linalg::tol::ZERO {
        return Err(Error::ZeroSymmetrization { norm });
    }
    let state = MultiState {
        single: env.single_space().clone(),
        particles: n,
        statistics: Some(statistics),
        amplitudes: out / C64::new(norm, 0.0),
    };
    Ok((state, 1.0 / norm))
}

/// An operator on the dense product space, annotated with the slots it touches.
#[derive(Clone, Debug)]
pub struct MultiOperator {
    single_dim: usize,
    particles: usize,
    slots: Vec<usize>,
    matrix: CMatrix,
}

impl MultiOperator {
    pub fn from_matrix(single_dim: usize, particles: usize, matrix: CMatrix) -> Result<Self> {
        let dim = product_dim(single_dim, particles);
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.nrows(),
            });
        }
        Ok(Self {
            single_dim,
            particles,
            slots: (0..particles).collect(),
            matrix,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn single_dim(&self) -> usize {
        self.single_dim
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        &self.matrix * v
    }

    /// Operator sum; the slot annotation is the union of both.
    pub fn plus(&self, other: &MultiOperator) -> Result<MultiOperator> {
        if self.matrix.shape() != other.matrix.shape() {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.nrows(),
                found: other.matrix.nrows(),
            });
        }
        let mut slots: Vec<usize> = self.slots.iter().chain(&other.slots).copied().collect();
        slots.sort_unstable();
        slots.dedup();
        Ok(MultiOperator {
            single_dim: self.single_dim,
            particles: self.particles,
            slots,
            matrix: &self.matrix + &other.matrix,
        })
    }
}

/// `1 (x) ... (x) O (x) ... (x) 1` with `O` on `slot`.
pub fn embed_op(op: &CMatrix, slot: usize, particles: usize) -> Result<MultiOperator> {
    if slot >= particles {
        return Err(Error::SlotOutOfRange { slot, particles });
    }
    if !op.is_square() {
        return Err(Error::DimensionMismatch {
            expected: op.nrows(),
            found: op.ncols(),
        });
    }
    let d = op.nrows();
    let left = identity(product_dim(d, slot));
    let right = identity(product_dim(d, particles - slot - 1));
    Ok(MultiOperator {
        single_dim: d,
        particles,
        slots: vec![slot],
        matrix: left.kronecker(op).kronecker(&right),
    })
}

/// `sum_l O^(l)` over all slots.
pub fn additive_embed(op: &CMatrix, particles: usize) -> Result<MultiOperator> {
    let mut acc = embed_op(op, 0, particles)?;
    for l in 1..particles {
        acc = acc.plus(&embed_op(op, l, particles)?)?;
    }
    Ok(acc)
}

/// Max-norm of the commutator `[A, B]`.
pub fn commutator_norm(a: &CMatrix, b: &CMatrix) -> f64 {
    max_norm(&(a * b - b * a))
}
