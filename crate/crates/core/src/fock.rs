//! Occupation-number spaces with creation and annihilation operators.
//!
//! Bosonic spaces are truncated at a total occupation `n_max`; fermionic
//! spaces are exact (every mode holds zero or one particle). The fermionic
//! sign of `a_k^dagger` on `|n>` is `(-1)^(n_0 + ... + n_{k-1})`.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{
    identity, max_norm, real_part_checked, tol, CMatrix, CVector, HermitianObservable, HilbertSpace, C64, ONE,
};
use crate::multiparticle::{compose, digits, product_dim, MultiState, Statistics, SymmetrySector};

/// An occupation-number space over `modes` single-particle states.
#[derive(Debug)]
pub struct FockSpace {
    modes: usize,
    statistics: Statistics,
    n_max: usize,
    basis: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    hilbert: HilbertSpace,
}

impl FockSpace {
    /// Bosonic space keeping every occupation pattern with total `<= n_max`.
    pub fn bosons(modes: usize, n_max: usize) -> Result<Arc<Self>> {
        Self::build(modes, Statistics::Boson, n_max)
    }

    /// Fermionic space; the cutoff is `modes`, so nothing is truncated.
    pub fn fermions(modes: usize) -> Result<Arc<Self>> {
        Self::build(modes, Statistics::Fermion, modes)
    }

    /// `n_max` is ignored for fermions.
    pub fn new(modes: usize, statistics: Statistics, n_max: usize) -> Result<Arc<Self>> {
        match statistics {
            Statistics::Boson => Self::bosons(modes, n_max),
            Statistics::Fermion => Self::fermions(modes),
        }
    }

    fn build(modes: usize, statistics: Statistics, n_max: usize) -> Result<Arc<Self>> {
        if modes == 0 {
            return Err(Error::InvalidParameter("Fock space needs at least one mode".into()));
        }
        if n_max > u8::MAX as usize {
            return Err(Error::InvalidParameter(format!("cutoff {n_max} too large")));
        }
        let per_mode = match statistics {
            Statistics::Boson => n_max,
            Statistics::Fermion => 1,
        };
        let mut basis = Vec::new();
        let mut current = vec![0u8; modes];
        enumerate(&mut current, 0, n_max, per_mode, &mut basis);
        basis.sort_by(|a, b| {
            let ta: usize = a.iter().map(|&x| x as usize).sum();
            let tb: usize = b.iter().map(|&x| x as usize).sum();
            ta.cmp(&tb).then_with(|| b.cmp(a))
        });
        let index = basis.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let labels = basis
            .iter()
            .map(|n| {
                let body: Vec<String> = n.iter().map(|x| x.to_string()).collect();
                format!("|{}>", body.join(","))
            })
            .collect();
        Ok(Arc::new(Self {
            modes,
            statistics,
            n_max,
            basis,
            index,
            hilbert: HilbertSpace::with_labels(labels)?,
        }))
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn statistics(&self) -> Statistics {
        self.statistics
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Labelled Hilbert space carrying the occupation basis.
    pub fn hilbert(&self) -> &HilbertSpace {
        &self.hilbert
    }

    pub fn occupations(&self, index: usize) -> &[u8] {
        &self.basis[index]
    }

    pub fn index_of(&self, occupations: &[u8]) -> Option<usize> {
        self.index.get(occupations).copied()
    }

    pub fn total(&self, index: usize) -> usize {
        self.basis[index].iter().map(|&x| x as usize).sum()
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes {
            return Err(Error::ModeOutOfRange {
                mode,
                modes: self.modes,
            });
        }
        Ok(())
    }

    pub fn create(self: &Arc<Self>, mode: usize) -> Result<LadderOperator> {
        self.check_mode(mode)?;
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        for (col, occ) in self.basis.iter().enumerate() {
            let n_k = occ[mode] as usize;
            let amplitude = match self.statistics {
                Statistics::Boson => ((n_k + 1) as f64).sqrt(),
                Statistics::Fermion => {
                    if n_k == 1 {
                        continue;
                    }
                    let below: usize = occ[..mode].iter().map(|&x| x as usize).sum();
                    if below % 2 == 1 {
                        -1.0
                    } else {
                        1.0
                    }
                }
            };
            let mut raised = occ.clone();
            raised[mode] += 1;
            if let Some(row) = self.index_of(&raised) {
                m[(row, col)] = C64::new(amplitude, 0.0);
            }
        }
        Ok(LadderOperator {
            space: Arc::clone(self),
            mode,
            kind: LadderKind::Create,
            matrix: m,
        })
    }

    pub fn annihilate(self: &Arc<Self>, mode: usize) -> Result<LadderOperator> {
        let c = self.create(mode)?;
        Ok(LadderOperator {
            kind: LadderKind::Annihilate,
            matrix: c.matrix.adjoint(),
            ..c
        })
    }

    /// `sum_n a_n^dagger a_n`.
    pub fn number_operator(&self) -> CMatrix {
        let totals: Vec<f64> = (0..self.dim()).map(|i| self.total(i) as f64).collect();
        crate::linalg::diagonal(&totals)
    }
}

fn enumerate(current: &mut Vec<u8>, mode: usize, remaining: usize, per_mode: usize, out: &mut Vec<Vec<u8>>) {
    if mode == current.len() {
        out.push(current.clone());
        return;
    }
    for n in 0..=remaining.min(per_mode) {
        current[mode] = n as u8;
        enumerate(current, mode + 1, remaining - n, per_mode, out);
    }
    current[mode] = 0;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LadderKind {
    Create,
    Annihilate,
}

#[derive(Clone, Debug)]
pub struct LadderOperator {
    space: Arc<FockSpace>,
    mode: usize,
    kind: LadderKind,
    matrix: CMatrix,
}

impl LadderOperator {
    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn kind(&self) -> LadderKind {
        self.kind
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn space(&self) -> &Arc<FockSpace> {
        &self.space
    }
}

/// A vector over the occupation basis. States built by the constructors are
/// normalized; results of [`apply_ladder`] may be unnormalized or zero.
#[derive(Clone, Debug)]
pub struct FockState {
    space: Arc<FockSpace>,
    amplitudes: CVector,
}

impl FockState {
    pub fn new(space: &Arc<FockSpace>, amplitudes: CVector) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: amplitudes.len(),
            });
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > tol::NORM {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self {
            space: Arc::clone(space),
            amplitudes,
        })
    }

    pub fn vacuum(space: &Arc<FockSpace>) -> Self {
        Self::from_occupations(space, &vec![0; space.modes()]).expect("vacuum is always in the basis")
    }

    pub fn from_occupations(space: &Arc<FockSpace>, occupations: &[u8]) -> Result<Self> {
        let idx = space
            .index_of(occupations)
            .ok_or_else(|| Error::InvalidParameter(format!("occupation {occupations:?} not in the basis")))?;
        let mut v = CVector::zeros(space.dim());
        v[idx] = ONE;
        Ok(Self {
            space: Arc::clone(space),
            amplitudes: v,
        })
    }

    pub fn space(&self) -> &Arc<FockSpace> {
        &self.space
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn is_zero(&self) -> bool {
        self.norm() < tol::ZERO
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm();
        if norm < tol::ZERO {
            return Err(Error::ZeroVector { norm });
        }
        Ok(Self {
            space: Arc::clone(&self.space),
            amplitudes: &self.amplitudes / C64::new(norm, 0.0),
        })
    }

    /// Amplitude of an occupation pattern, zero when it is outside the basis.
    pub fn amplitude(&self, occupations: &[u8]) -> C64 {
        self.space
            .index_of(occupations)
            .map(|i| self.amplitudes[i])
            .unwrap_or(C64::new(0.0, 0.0))
    }
}

/// Applies a ladder operator. Bosonic creation on a component at the cutoff
/// shell is an error rather than a silent truncation.
pub fn apply_ladder(op: &LadderOperator, state: &FockState) -> Result<FockState> {
    if !Arc::ptr_eq(op.space(), state.space()) && op.space().dim() != state.space().dim() {
        return Err(Error::DimensionMismatch {
            expected: op.space().dim(),
            found: state.space().dim(),
        });
    }
    let space = state.space();
    if op.kind == LadderKind::Create && space.statistics() == Statistics::Boson {
        for (i, a) in state.amplitudes.iter().enumerate() {
            if a.norm() > tol::ZERO && space.total(i) == space.n_max() {
                return Err(Error::CutoffExceeded {
                    mode: op.mode,
                    cutoff: space.n_max(),
                });
            }
        }
    }
    Ok(FockState {
        space: Arc::clone(space),
        amplitudes: op.matrix() * state.amplitudes(),
    })
}

/// `sum_n o_n a_n^dagger a_n`, diagonal in the occupation basis.
pub fn additive_fock_observable(space: &Arc<FockSpace>, eigenvalues: &[f64]) -> Result<HermitianObservable> {
    if eigenvalues.len() != space.modes() {
        return Err(Error::DimensionMismatch {
            expected: space.modes(),
            found: eigenvalues.len(),
        });
    }
    let diag: Vec<f64> = (0..space.dim())
        .map(|i| {
            space
                .occupations(i)
                .iter()
                .zip(eigenvalues)
                .map(|(&n, &o)| n as f64 * o)
                .sum()
        })
        .collect();
    HermitianObservable::diagonal(space.hilbert(), &diag)
}

/// `<s|O|s>`.
pub fn fock_expectation(state: &FockState, observable: &HermitianObservable) -> Result<f64> {
    if observable.dim() != state.space().dim() {
        return Err(Error::DimensionMismatch {
            expected: state.space().dim(),
            found: observable.dim(),
        });
    }
    let v = state.amplitudes();
    real_part_checked(v.dotc(&(observable.matrix() * v)))
}

/// `a_k^dagger a_l^dagger |0>`.
pub fn two_particle_state(space: &Arc<FockSpace>, k: usize, l: usize) -> Result<FockState> {
    let vac = FockState::vacuum(space);
    let once = apply_ladder(&space.create(l)?, &vac)?;
    apply_ladder(&space.create(k)?, &once)
}

fn ccr_defect(space: &Arc<FockSpace>, r: usize, s: usize) -> Result<CMatrix> {
    let a_r = space.annihilate(r)?;
    let ad_s = space.create(s)?;
    let eta = C64::new(space.statistics().sign(), 0.0);
    let mut m = a_r.matrix() * ad_s.matrix() - ad_s.matrix() * a_r.matrix() * eta;
    if r == s {
        m -= identity(space.dim());
    }
    Ok(m)
}

fn column_block_max(m: &CMatrix, keep: impl Fn(usize) -> bool) -> f64 {
    let mut worst: f64 = 0.0;
    for c in (0..m.ncols()).filter(|&c| keep(c)) {
        for r in 0..m.nrows() {
            worst = worst.max(m[(r, c)].norm());
        }
    }
    worst
}

/// Max-norm of `a_r a_s^dagger - eta a_s^dagger a_r - delta_rs` acting on the
/// occupation states where the cutoff cannot interfere (total `<= n_max - 1`
/// for bosons, the whole space for fermions).
pub fn check_ccr(space: &Arc<FockSpace>, r: usize, s: usize) -> Result<f64> {
    let m = ccr_defect(space, r, s)?;
    Ok(match space.statistics() {
        Statistics::Fermion => max_norm(&m),
        Statistics::Boson => column_block_max(&m, |c| space.total(c) < space.n_max()),
    })
}

/// The same defect on the top bosonic shell, where truncation breaks the relation.
pub fn ccr_cutoff_artifact(space: &Arc<FockSpace>, r: usize, s: usize) -> Result<f64> {
    let m = ccr_defect(space, r, s)?;
    Ok(column_block_max(&m, |c| space.total(c) == space.n_max()))
}

/// Multiplicity normalization of an occupation pattern: the square root of
/// the number of distinct slot arrangements (bosons) or of `N!` (fermions).
fn pattern_weight(occ: &[u8], statistics: Statistics) -> f64 {
    let n: usize = occ.iter().map(|&x| x as usize).sum();
    let fact = |k: usize| (1..=k).map(|x| x as f64).product::<f64>();
    match statistics {
        Statistics::Boson => (fact(n) / occ.iter().map(|&x| fact(x as usize)).product::<f64>()).sqrt(),
        Statistics::Fermion => fact(n).sqrt(),
    }
}

fn canonical_modes(occ: &[u8]) -> Vec<usize> {
    occ.iter()
        .enumerate()
        .flat_map(|(mode, &n)| std::iter::repeat_n(mode, n as usize))
        .collect()
}

/// Maps a tau-symmetric `N`-particle wave function onto the `N`-particle shell
/// of `space`, which must have matching statistics and cutoff at least `N`.
///
/// The fermionic pattern with occupied modes `i_1 < ... < i_N` corresponds to
/// `a_{i_1}^dagger ... a_{i_N}^dagger |0>` and to the Slater determinant with
/// `e_{i_1}` in slot 0.
pub fn occupation_isomorphism(state: &MultiState, space: &Arc<FockSpace>) -> Result<FockState> {
    let eta = space.statistics();
    match state.statistics() {
        Some(tau) if tau != eta => {
            return Err(Error::StatisticsMismatch(format!(
                "wave function is {tau:?}, Fock space is {eta:?}"
            )))
        }
        Some(_) => {}
        None => {
            let defect = state.symmetry_defect(eta);
            if defect > crate::multiparticle::SYMMETRY_TOL {
                return Err(Error::NotSymmetric { defect });
            }
        }
    }
    let d = state.single_dim();
    let n = state.particles();
    if space.modes() != d {
        return Err(Error::DimensionMismatch {
            expected: space.modes(),
            found: d,
        });
    }
    if eta == Statistics::Boson && space.n_max() < n {
        return Err(Error::CutoffExceeded {
            mode: 0,
            cutoff: space.n_max(),
        });
    }
    let mut amplitudes = CVector::zeros(space.dim());
    for i in 0..space.dim() {
        let occ = space.occupations(i);
        if space.total(i) != n {
            continue;
        }
        let modes = canonical_modes(occ);
        amplitudes[i] = state.amplitudes()[compose(&modes, d)] * pattern_weight(occ, eta);
    }
    FockState::new(space, amplitudes)
}

/// Inverse of [`occupation_isomorphism`] on the `particles`-particle shell.
pub fn from_occupation(state: &FockState, particles: usize) -> Result<MultiState> {
    let space = state.space();
    let eta = space.statistics();
    let d = space.modes();
    let off_shell: f64 = (0..space.dim())
        .filter(|&i| space.total(i) != particles)
        .map(|i| state.amplitudes()[i].norm_sqr())
        .sum();
    if off_shell > tol::ZERO {
        return Err(Error::InvalidParameter(format!(
            "state has weight {off_shell:e} outside the {particles}-particle shell"
        )));
    }
    let mut amplitudes = CVector::zeros(product_dim(d, particles));
    for (idx, slot) in amplitudes.iter_mut().enumerate() {
        let dig = digits(idx, d, particles);
        let mut occ = vec![0u8; d];
        for &m in &dig {
            occ[m] += 1;
        }
        if eta == Statistics::Fermion && occ.iter().any(|&x| x > 1) {
            continue;
        }
        let c = state.amplitude(&occ) / pattern_weight(&occ, eta);
        let sign = match eta {
            Statistics::Boson => 1.0,
            Statistics::Fermion => {
                let inversions = (0..particles)
                    .flat_map(|i| (i + 1..particles).map(move |j| (i, j)))
                    .filter(|&(i, j)| dig[i] > dig[j])
                    .count();
                if inversions % 2 == 1 {
                    -1.0
                } else {
                    1.0
                }
            }
        };
        *slot = c * sign;
    }
    let sector = SymmetrySector::new(eta, particles, &HilbertSpace::new(d)?)?;
    MultiState::in_sector(&sector, amplitudes)
}
