//! Dense complex linear algebra for finite-dimensional quantum systems.
//!
//! Every continuous variable is discretized onto a finite basis, so states are
//! plain complex vectors, observables are Hermitian matrices and spectral
//! measures are finite sums of eigenprojectors. Validity (normalization,
//! Hermiticity, positivity) is checked once, when a value is constructed.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerances shared across the crate.
pub mod tol {
    /// Norm of a finalized state.
    pub const NORM: f64 = 1e-12;
    /// Hermiticity of states and observables, max-norm of `A - A^dagger`.
    pub const HERMITIAN: f64 = 1e-12;
    /// Trace of a density operator.
    pub const TRACE: f64 = 1e-12;
    /// Smallest eigenvalue accepted for a positive semidefinite operator.
    pub const POSITIVE: f64 = 1e-10;
    /// Idempotency and Hermiticity of projectors.
    pub const PROJECTOR: f64 = 1e-10;
    /// Slack allowed when clamping probabilities into `[0, 1]`.
    pub const PROBABILITY: f64 = 1e-10;
    /// Imaginary parts below this are discarded from expectation values.
    pub const IMAG_DISCARD: f64 = 1e-10;
    /// Imaginary parts above this are an error.
    pub const IMAG_ERROR: f64 = 1e-8;
    /// Norm below which a vector counts as zero.
    pub const ZERO: f64 = 1e-12;
    /// Relative eigenvalue clustering tolerance (times spectral radius).
    pub const CLUSTER_RELATIVE: f64 = 1e-9;
}

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Largest entry modulus of a matrix.
pub fn max_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest entry modulus of a vector.
pub fn vec_max_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max-norm of `A - A^dagger`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    max_norm(&(m - m.adjoint()))
}

/// `|<u, v>|`, the overlap modulus used to compare states up to a global phase.
pub fn overlap_modulus(u: &CVector, v: &CVector) -> f64 {
    u.dotc(v).norm()
}

/// True when two normalized vectors describe the same ray.
pub fn same_ray(u: &CVector, v: &CVector, tol: f64) -> bool {
    u.len() == v.len() && (1.0 - overlap_modulus(u, v)).abs() < tol
}

/// `|u><v|`.
pub fn outer(u: &CVector, v: &CVector) -> CMatrix {
    u * v.adjoint()
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Real diagonal matrix.
pub fn diagonal(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(
        values.len(),
        values.iter().map(|&x| C64::new(x, 0.0)),
    ))
}

/// Kronecker product of a sequence of vectors, first factor most significant.
pub fn kron_vectors<'a>(factors: impl IntoIterator<Item = &'a CVector>) -> CVector {
    let mut acc = CVector::from_element(1, ONE);
    for f in factors {
        acc = acc.kronecker(f);
    }
    acc
}

/// Trace of a product `tr(A B)` without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Eigenvalues (ascending) and matching eigenvector columns of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Orthonormal basis of the column span of `m` (modified Gram-Schmidt), dropping
/// columns whose residual norm falls below `tol`.
pub fn orthonormal_columns(m: &CMatrix, tol: f64) -> Vec<CVector> {
    let mut basis: Vec<CVector> = Vec::new();
    for j in 0..m.ncols() {
        let mut v: CVector = m.column(j).into_owned();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dotc(&v);
                v -= b * c;
            }
        }
        let n = v.norm();
        if n > tol {
            basis.push(v / C64::new(n, 0.0));
        }
    }
    basis
}

/// A finite-dimensional Hilbert space with a semantic label per basis vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HilbertSpace {
    labels: Arc<[String]>,
}

impl HilbertSpace {
    /// Space of dimension `dim` with labels `e1, ..., e{dim}`.
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_labels((1..=dim).map(|i| format!("e{i}")).collect())
    }

    pub fn with_labels(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidSpace("dimension must be at least 1".into()));
        }
        let mut sorted: Vec<&String> = labels.iter().collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidSpace(format!("duplicate label {:?}", w[0])));
        }
        Ok(Self { labels: labels.into() })
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    /// The `n`-fold tensor power, labels joined with commas.
    pub fn power(&self, n: usize) -> Result<Self> {
        let mut labels = vec![String::new()];
        for _ in 0..n {
            labels = labels
                .iter()
                .flat_map(|prefix| {
                    self.labels.iter().map(move |l| {
                        if prefix.is_empty() {
                            l.clone()
                        } else {
                            format!("{prefix},{l}")
                        }
                    })
                })
                .collect();
        }
        Self::with_labels(labels)
    }

    fn check(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }
}

/// A normalized pure state.
#[derive(Clone, Debug)]
pub struct StateVector {
    space: HilbertSpace,
    amplitudes: CVector,
}

impl StateVector {
    /// Wraps amplitudes that must already have unit norm.
    pub fn new(space: &HilbertSpace, amplitudes: CVector) -> Result<Self> {
        space.check(amplitudes.len())?;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > tol::NORM {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self {
            space: space.clone(),
            amplitudes,
        })
    }

    /// Rescales arbitrary nonzero amplitudes to unit norm.
    pub fn normalized(space: &HilbertSpace, amplitudes: CVector) -> Result<Self> {
        space.check(amplitudes.len())?;
        let norm = amplitudes.norm();
        if norm < tol::ZERO {
            return Err(Error::ZeroVector { norm });
        }
        Ok(Self {
            space: space.clone(),
            amplitudes: amplitudes / C64::new(norm, 0.0),
        })
    }

    pub fn from_real(space: &HilbertSpace, amplitudes: &[f64]) -> Result<Self> {
        let v = CVector::from_iterator(amplitudes.len(), amplitudes.iter().map(|&x| C64::new(x, 0.0)));
        Self::normalized(space, v)
    }

    /// Basis vector `index` (zero-based).
    pub fn basis(space: &HilbertSpace, index: usize) -> Result<Self> {
        if index >= space.dim() {
            return Err(Error::IndexOutOfRange {
                index,
                len: space.dim(),
            });
        }
        let mut v = CVector::zeros(space.dim());
        v[index] = ONE;
        Ok(Self {
            space: space.clone(),
            amplitudes: v,
        })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// `<self, other>`, antilinear in `self`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn density(&self) -> DensityOperator {
        DensityOperator {
            space: self.space.clone(),
            matrix: outer(&self.amplitudes, &self.amplitudes),
        }
    }
}

/// A mixed state: Hermitian, positive semidefinite, trace one.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    space: HilbertSpace,
    matrix: CMatrix,
}

impl DensityOperator {
    pub fn new(space: &HilbertSpace, matrix: CMatrix) -> Result<Self> {
        space.check(matrix.nrows())?;
        space.check(matrix.ncols())?;
        let deviation = hermiticity_defect(&matrix);
        if deviation > tol::HERMITIAN {
            return Err(Error::NotHermitian { deviation });
        }
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > tol::TRACE {
            return Err(Error::NotTraceOne { trace });
        }
        let (values, _) = hermitian_eigen(&matrix);
        let min_eigenvalue = values[0];
        if min_eigenvalue < -tol::POSITIVE {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(Self {
            space: space.clone(),
            matrix,
        })
    }

    pub fn from_pure(state: &StateVector) -> Self {
        state.density()
    }

    /// Convex combination `sum_i w_i |psi_i><psi_i|`; weights must sum to one.
    pub fn mixture(space: &HilbertSpace, components: &[(f64, &StateVector)]) -> Result<Self> {
        let mut m = CMatrix::zeros(space.dim(), space.dim());
        for (w, s) in components {
            space.check(s.dim())?;
            if *w < 0.0 {
                return Err(Error::InvalidParameter(format!("negative mixture weight {w}")));
            }
            m += outer(s.amplitudes(), s.amplitudes()) * C64::new(*w, 0.0);
        }
        Self::new(space, m)
    }

    pub fn maximally_mixed(space: &HilbertSpace) -> Self {
        let d = space.dim();
        Self {
            space: space.clone(),
            matrix: identity(d) / C64::new(d as f64, 0.0),
        }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Eigenpairs `(p_j, v_j)` with `p_j > cutoff`, largest weight first.
    pub fn components(&self, cutoff: f64) -> Vec<(f64, CVector)> {
        let (values, vectors) = hermitian_eigen(&self.matrix);
        let mut out: Vec<(f64, CVector)> = values
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > cutoff)
            .map(|(i, &p)| (p, vectors.column(i).into_owned()))
            .collect();
        out.reverse();
        out
    }
}

/// A Hermitian operator on a given space.
#[derive(Clone, Debug)]
pub struct HermitianObservable {
    space: HilbertSpace,
    matrix: CMatrix,
}

impl HermitianObservable {
    pub fn new(space: &HilbertSpace, matrix: CMatrix) -> Result<Self> {
        space.check(matrix.nrows())?;
        space.check(matrix.ncols())?;
        let deviation = hermiticity_defect(&matrix);
        if deviation > tol::HERMITIAN {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self {
            space: space.clone(),
            matrix,
        })
    }

    pub fn diagonal(space: &HilbertSpace, values: &[f64]) -> Result<Self> {
        Self::new(space, diagonal(values))
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

/// An orthogonal projector, validated to be Hermitian and idempotent.
#[derive(Clone, Debug)]
pub struct Projector(CMatrix);

impl Projector {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotProjector {
                deviation: f64::INFINITY,
            });
        }
        let deviation = hermiticity_defect(&matrix).max(max_norm(&(&matrix * &matrix - &matrix)));
        if deviation > tol::PROJECTOR {
            return Err(Error::NotProjector { deviation });
        }
        Ok(Self(matrix))
    }

    pub fn identity(dim: usize) -> Self {
        Self(identity(dim))
    }

    pub fn zero(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    /// Projector onto the span of the given vectors in `dim` dimensions.
    pub fn onto_span(dim: usize, vectors: &[CVector]) -> Result<Self> {
        let mut m = CMatrix::zeros(dim, vectors.len());
        for (j, v) in vectors.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            m.set_column(j, v);
        }
        let mut p = CMatrix::zeros(dim, dim);
        for b in orthonormal_columns(&m, tol::ZERO) {
            p += outer(&b, &b);
        }
        Ok(Self(p))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn rank(&self) -> usize {
        self.0.trace().re.round() as usize
    }

    pub fn complement(&self) -> Self {
        Self(identity(self.dim()) - &self.0)
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        max_norm(&(&self.0 - identity(self.dim()))) < tol
    }

    /// Orthonormal basis of the range.
    pub fn range_basis(&self) -> Vec<CVector> {
        orthonormal_columns(&self.0, 1e-8)
    }
}

/// Clustered spectral decomposition `O = sum_k o_k Pi_k`.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    projectors: Vec<Projector>,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn projectors(&self) -> &[Projector] {
        &self.projectors
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].dim()
    }

    /// `sum_k o_k Pi_k`.
    pub fn reconstruct(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        for (o, p) in self.eigenvalues.iter().zip(&self.projectors) {
            m += p.matrix() * C64::new(*o, 0.0);
        }
        m
    }

    /// Builds a decomposition from explicit parts. Used by coarse graining,
    /// where the projectors are sums of original eigenprojectors.
    pub(crate) fn from_parts(eigenvalues: Vec<f64>, projectors: Vec<Projector>) -> Self {
        Self {
            eigenvalues,
            projectors,
        }
    }
}

/// Eigendecomposition with eigenvalues closer than `cluster_tol` merged into a
/// single projector. `None` uses `1e-9` times the spectral radius.
pub fn spectral_decompose(observable: &HermitianObservable, cluster_tol: Option<f64>) -> SpectralDecomposition {
    let (values, vectors) = hermitian_eigen(observable.matrix());
    let radius = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let tol = cluster_tol.unwrap_or(tol::CLUSTER_RELATIVE * radius).max(1e-14);

    let n = values.len();
    let mut eigenvalues = Vec::new();
    let mut projectors = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[end] - values[end - 1] < tol {
            end += 1;
        }
        let mut p = CMatrix::zeros(n, n);
        for c in start..end {
            let v = vectors.column(c).into_owned();
            p += outer(&v, &v);
        }
        eigenvalues.push(values[start..end].iter().sum::<f64>() / (end - start) as f64);
        projectors.push(Projector(p));
        start = end;
    }
    SpectralDecomposition {
        eigenvalues,
        projectors,
    }
}

fn clamp_probability(p: f64) -> Result<f64> {
    if !(-tol::PROBABILITY..=1.0 + tol::PROBABILITY).contains(&p) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// `tr(T P)`, the probability of registering the event `P` on state `T`.
pub fn born_probability(state: &DensityOperator, projector: &Projector) -> Result<f64> {
    if state.dim() != projector.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            found: projector.dim(),
        });
    }
    clamp_probability(trace_product(state.matrix(), projector.matrix()).re)
}

/// `tr(T O)` for a Hermitian `O`.
pub fn expectation(state: &DensityOperator, observable: &HermitianObservable) -> Result<f64> {
    if state.dim() != observable.dim() {
        return Err(Error::DimensionMismatch {
            expected: state.dim(),
            found: observable.dim(),
        });
    }
    real_part_checked(trace_product(state.matrix(), observable.matrix()))
}

/// Drops a small imaginary residue, rejecting a large one.
pub(crate) fn real_part_checked(z: C64) -> Result<f64> {
    if z.im.abs() > tol::IMAG_ERROR {
        return Err(Error::ImaginaryResidue(z.im));
    }
    Ok(z.re)
}

/// `tr(T E)` for an operator known to be an effect, clamped into `[0, 1]`.
pub(crate) fn effect_probability(state: &DensityOperator, effect: &CMatrix) -> Result<f64> {
    clamp_probability(trace_product(state.matrix(), effect).re)
}

/// Converts a matrix of real numbers to a complex one.
pub fn real_matrix(rows: usize, cols: usize, row_major: &[f64]) -> CMatrix {
    CMatrix::from_row_iterator(rows, cols, row_major.iter().map(|&x| C64::new(x, 0.0)))
}

/// Real diagonal of a matrix.
pub fn real_diagonal(m: &CMatrix) -> DVector<f64> {
    DVector::from_iterator(m.nrows(), (0..m.nrows()).map(|i| m[(i, i)].re))
}
