//! Separation status: a prepared single-particle state must contract to zero
//! against the state of every object in its environment made of the same kind
//! of particle. Only then can a meter register the prepared particle without
//! reacting to its indistinguishable partners.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{max_norm, CMatrix, CVector, DensityOperator, HilbertSpace, StateVector, C64};
use crate::multiparticle::{product_dim, symmetrize, MultiState, Statistics, SymmetrySector, SYMMETRY_TOL};

pub const DEFAULT_TOL: f64 = 1e-10;

/// An environment object: `N` particles of the prepared kind in a joint state
/// supported on the tau-symmetric sector.
#[derive(Clone, Debug)]
pub struct EnvironmentObject {
    label: String,
    sector: SymmetrySector,
    state: DensityOperator,
}

impl EnvironmentObject {
    pub fn new(label: &str, sector: SymmetrySector, state: CMatrix) -> Result<Self> {
        let space = sector.single_space().power(sector.particles())?;
        let state = DensityOperator::new(&space, state)?;
        let s = sector.symmetrizer();
        let defect = max_norm(&(&s * state.matrix() - state.matrix()));
        if defect > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { defect });
        }
        Ok(Self {
            label: label.to_string(),
            sector,
            state,
        })
    }

    /// `|Psi><Psi|` for a tau-symmetric pure state.
    pub fn from_pure(label: &str, statistics: Statistics, state: &MultiState) -> Result<Self> {
        let sector = SymmetrySector::new(statistics, state.particles(), state.single_space())?;
        let a = state.amplitudes();
        Self::new(label, sector, a * a.adjoint())
    }

    /// The normalized tau-symmetrization of `chi_1 ⊗ ... ⊗ chi_N`.
    pub fn symmetrized_product(label: &str, statistics: Statistics, factors: &[&StateVector]) -> Result<Self> {
        let product = MultiState::product(factors)?;
        let sector = SymmetrySector::new(statistics, product.particles(), product.single_space())?;
        let sym = symmetrize(
            product.amplitudes(),
            product.single_dim(),
            product.particles(),
            statistics,
        );
        let state = MultiState::normalized_in_sector(&sector, sym)?;
        Self::from_pure(label, statistics, &state)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn sector(&self) -> &SymmetrySector {
        &self.sector
    }

    pub fn state(&self) -> &DensityOperator {
        &self.state
    }

    pub fn particles(&self) -> usize {
        self.sector.particles()
    }

    pub fn single_dim(&self) -> usize {
        self.sector.single_space().dim()
    }

    /// A copy with the state conjugated by `U ⊗ ... ⊗ U`.
    pub fn transformed(&self, u: &CMatrix) -> Result<Self> {
        let n = self.particles();
        let mut big = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        for _ in 0..n {
            big = big.kronecker(u);
        }
        let m = &big * self.state.matrix() * big.adjoint();
        let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        Self::new(&self.label, self.sector.clone(), m)
    }
}

/// The environment's inventory of objects made of the prepared particle kind.
#[derive(Clone, Debug, Default)]
pub struct Environment {
    objects: Vec<EnvironmentObject>,
}

impl Environment {
    pub fn new(objects: Vec<EnvironmentObject>) -> Result<Self> {
        if let Some(first) = objects.first() {
            let d = first.single_dim();
            if let Some(bad) = objects.iter().find(|o| o.single_dim() != d) {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: bad.single_dim(),
                });
            }
        }
        Ok(Self { objects })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn objects(&self) -> &[EnvironmentObject] {
        &self.objects
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn transformed(&self, u: &CMatrix) -> Result<Self> {
        Ok(Self {
            objects: self.objects.iter().map(|o| o.transformed(u)).collect::<Result<_>>()?,
        })
    }
}

/// Hilbert-Schmidt norm of `sum_{l'} T(l_1..l_N; .., l', ..) psi(l')` with the
/// primed argument in `slot` consumed. Unlike an entrywise maximum this norm is
/// unchanged by a common single-particle change of basis.
pub fn contraction_residual_at_slot(object: &EnvironmentObject, psi: &CVector, slot: usize) -> Result<f64> {
    let d = object.single_dim();
    let n = object.particles();
    if psi.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: psi.len(),
        });
    }
    if slot >= n {
        return Err(Error::SlotOutOfRange { slot, particles: n });
    }
    let t = object.state.matrix();
    let rows = product_dim(d, n);
    // column index = high * d^(n-slot) + l' * d^(n-slot-1) + low
    let low_dim = product_dim(d, n - slot - 1);
    let high_dim = product_dim(d, slot);
    let mut sq: f64 = 0.0;
    for r in 0..rows {
        for high in 0..high_dim {
            for low in 0..low_dim {
                let mut acc = C64::new(0.0, 0.0);
                for (l, &amp) in psi.iter().enumerate() {
                    acc += t[(r, (high * d + l) * low_dim + low)] * amp;
                }
                sq += acc.norm_sqr();
            }
        }
    }
    Ok(sq.sqrt())
}

/// Residual of the separation condition against one object, contracting the
/// first primed argument. By tau-symmetry every slot gives the same value.
pub fn contraction_residual(object: &EnvironmentObject, psi: &StateVector) -> Result<f64> {
    contraction_residual_at_slot(object, psi.amplitudes(), 0)
}

/// Mixed prepared states: the eigen-ensemble average `sum_j p_j r(v_j)`.
///
/// This extension of the pure-state condition is a modelling choice; it vanishes
/// iff every eigenvector of the prepared state is separated.
pub fn mixed_contraction_residual(object: &EnvironmentObject, state: &DensityOperator) -> Result<f64> {
    state
        .components(1e-14)
        .iter()
        .map(|(p, v)| contraction_residual_at_slot(object, v, 0).map(|r| p * r))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObjectVerdict {
    pub label: String,
    pub residual: f64,
    pub separated: bool,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationReport {
    pub objects: Vec<ObjectVerdict>,
    pub separated: bool,
    pub tolerance: f64,
}

impl SeparationReport {
    fn from_residuals(env: &Environment, residuals: Vec<f64>, tolerance: f64) -> Self {
        let objects: Vec<ObjectVerdict> = env
            .objects
            .iter()
            .zip(residuals)
            .map(|(o, residual)| ObjectVerdict {
                label: o.label.clone(),
                residual,
                separated: residual < tolerance,
                tolerance,
            })
            .collect();
        let separated = objects.iter().all(|o| o.separated);
        Self {
            objects,
            separated,
            tolerance,
        }
    }

    pub fn failing(&self) -> impl Iterator<Item = &ObjectVerdict> {
        self.objects.iter().filter(|o| !o.separated)
    }

    pub fn max_residual(&self) -> f64 {
        self.objects.iter().map(|o| o.residual).fold(0.0, f64::max)
    }

    pub fn summary(&self) -> String {
        if self.separated {
            return format!("separated from all {} objects", self.objects.len());
        }
        let failing: Vec<String> = self
            .failing()
            .map(|o| format!("{} (residual {:.3e})", o.label, o.residual))
            .collect();
        format!("not separated from {}", failing.join(", "))
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "separation tolerance must be positive, got {tol}"
        )))
    }
}

/// Per-object verdicts; separated iff every residual is below `tol`.
pub fn has_separation_status(psi: &StateVector, env: &Environment, tol: f64) -> Result<SeparationReport> {
    check_tol(tol)?;
    let residuals = env
        .objects
        .par_iter()
        .map(|o| contraction_residual(o, psi))
        .collect::<Result<Vec<_>>>()?;
    Ok(SeparationReport::from_residuals(env, residuals, tol))
}

pub fn has_separation_status_mixed(state: &DensityOperator, env: &Environment, tol: f64) -> Result<SeparationReport> {
    check_tol(tol)?;
    let residuals = env
        .objects
        .par_iter()
        .map(|o| mixed_contraction_residual(o, state))
        .collect::<Result<Vec<_>>>()?;
    Ok(SeparationReport::from_residuals(env, residuals, tol))
}

/// `phi = c1 psi + c2 psi_perp` with `c2 >= 0` real.
#[derive(Clone, Debug)]
pub struct OverlapDecomposition {
    pub c1: C64,
    pub c2: f64,
    /// `None` when `phi` is parallel to `psi`.
    pub psi_perp: Option<StateVector>,
}

pub fn overlap_decompose(phi: &StateVector, psi: &StateVector) -> Result<OverlapDecomposition> {
    if phi.dim() != psi.dim() {
        return Err(Error::DimensionMismatch {
            expected: psi.dim(),
            found: phi.dim(),
        });
    }
    let c1 = psi.inner(phi);
    let rest = phi.amplitudes() - psi.amplitudes() * c1;
    let c2 = rest.norm();
    let psi_perp = if c2 < 1e-12 {
        None
    } else {
        Some(StateVector::new(phi.space(), rest.unscale(c2))?)
    };
    Ok(OverlapDecomposition {
        c1,
        c2: if psi_perp.is_some() { c2 } else { 0.0 },
        psi_perp,
    })
}

/// Environment of pure symmetrized products over `space`, convenient in tests and scenarios.
pub fn product_environment(
    space: &HilbertSpace,
    statistics: Statistics,
    objects: &[(&str, Vec<usize>)],
) -> Result<Environment> {
    let mut out = Vec::with_capacity(objects.len());
    for (label, modes) in objects {
        let states = modes
            .iter()
            .map(|&m| StateVector::basis(space, m))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&StateVector> = states.iter().collect();
        out.push(EnvironmentObject::symmetrized_product(label, statistics, &refs)?);
    }
    Environment::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orthonormal_columns, outer};
    use crate::multiparticle::digits;

    fn space(d: usize) -> HilbertSpace {
        HilbertSpace::new(d).unwrap()
    }

    fn basis_object(s: &HilbertSpace, k: usize) -> EnvironmentObject {
        let e = StateVector::basis(s, k).unwrap();
        EnvironmentObject::symmetrized_product("single", Statistics::Boson, &[&e]).unwrap()
    }

    /// Explicit index loop over the full tensor, independent of the strided kernel.
    fn oracle_residual(t: &CMatrix, psi: &CVector, d: usize, n: usize, slot: usize) -> f64 {
        let dim = product_dim(d, n);
        let mut sq: f64 = 0.0;
        for r in 0..dim {
            for c in 0..dim {
                let dc = digits(c, d, n);
                if dc[slot] != 0 {
                    continue;
                }
                let mut acc = C64::new(0.0, 0.0);
                for l in 0..d {
                    let mut dd = dc.clone();
                    dd[slot] = l;
                    acc += t[(r, crate::multiparticle::compose(&dd, d))] * psi[l];
                }
                sq += acc.norm_sqr();
            }
        }
        sq.sqrt()
    }

    #[test]
    fn residual_examples() {
        let s = space(3);
        let obj = basis_object(&s, 0);
        let e2 = StateVector::basis(&s, 1).unwrap();
        assert_eq!(contraction_residual(&obj, &e2).unwrap(), 0.0);
        let plus = StateVector::from_real(&s, &[1.0, 1.0, 0.0]).unwrap();
        assert!((contraction_residual(&obj, &plus).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);

        let e1 = StateVector::basis(&s, 0).unwrap();
        let pair = EnvironmentObject::symmetrized_product("pair", Statistics::Boson, &[&e1, &e2]).unwrap();
        let e3 = StateVector::basis(&s, 2).unwrap();
        assert_eq!(contraction_residual(&pair, &e3).unwrap(), 0.0);
        let r = contraction_residual(&pair, &plus).unwrap();
        let o = oracle_residual(pair.state().matrix(), plus.amplitudes(), 3, 2, 0);
        assert!((r - o).abs() < 1e-15 && r > 0.1);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let obj = basis_object(&space(3), 0);
        let psi = StateVector::basis(&space(2), 0).unwrap();
        assert!(matches!(
            contraction_residual(&obj, &psi),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_symmetric_state_rejected() {
        let s = space(2);
        let sector = SymmetrySector::new(Statistics::Fermion, 2, &s).unwrap();
        let v = crate::linalg::kron_vectors([
            StateVector::basis(&s, 0).unwrap().amplitudes(),
            StateVector::basis(&s, 1).unwrap().amplitudes(),
        ]);
        assert!(matches!(
            EnvironmentObject::new("bad", sector, outer(&v, &v)),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn status_examples() {
        let s = space(3);
        let e2 = StateVector::basis(&s, 1).unwrap();
        let r = has_separation_status(&e2, &Environment::empty(), DEFAULT_TOL).unwrap();
        assert!(r.separated && r.objects.is_empty());

        let env = product_environment(&s, Statistics::Boson, &[("atom", vec![0])]).unwrap();
        assert!(has_separation_status(&e2, &env, DEFAULT_TOL).unwrap().separated);

        let env = product_environment(&s, Statistics::Boson, &[("atom", vec![0]), ("pair", vec![1, 2])]).unwrap();
        let r = has_separation_status(&e2, &env, DEFAULT_TOL).unwrap();
        assert!(!r.separated);
        assert!(r.objects[0].separated && !r.objects[1].separated);
        assert!(r.summary().contains("pair"));
        assert!(has_separation_status(&e2, &env, 0.0).is_err());
    }

    #[test]
    fn every_slot_gives_same_residual() {
        let s = space(3);
        let a = StateVector::from_real(&s, &[1.0, 0.5, 0.0]).unwrap();
        let b = StateVector::from_real(&s, &[0.0, 1.0, -1.0]).unwrap();
        let c = StateVector::from_real(&s, &[0.2, 0.0, 1.0]).unwrap();
        let psi = StateVector::from_real(&s, &[0.3, -0.4, 0.8]).unwrap();
        for stats in Statistics::both() {
            let obj = EnvironmentObject::symmetrized_product("x", stats, &[&a, &b, &c]).unwrap();
            let r0 = contraction_residual_at_slot(&obj, psi.amplitudes(), 0).unwrap();
            for slot in 1..3 {
                let r = contraction_residual_at_slot(&obj, psi.amplitudes(), slot).unwrap();
                assert!((r - r0).abs() < 1e-12);
                let o = oracle_residual(obj.state().matrix(), psi.amplitudes(), 3, 3, slot);
                assert!((r - o).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn product_residual_vanishes_iff_orthogonal_to_support() {
        // brute force over small real grids at d = 3, N = 2
        let s = space(3);
        let grid = [-1.0, 0.0, 1.0];
        let mut vectors = Vec::new();
        for &x in &grid {
            for &y in &grid {
                for &z in &grid {
                    if x != 0.0 || y != 0.0 || z != 0.0 {
                        vectors.push(StateVector::from_real(&s, &[x, y, z]).unwrap());
                    }
                }
            }
        }
        let chi = [&vectors[4], &vectors[10]];
        for stats in Statistics::both() {
            let Ok(obj) = EnvironmentObject::symmetrized_product("chi", stats, &chi) else {
                continue;
            };
            let support = orthonormal_columns(
                &CMatrix::from_columns(&[chi[0].amplitudes().clone(), chi[1].amplitudes().clone()]),
                1e-12,
            );
            for psi in &vectors {
                let overlap: f64 = support
                    .iter()
                    .map(|u| u.dotc(psi.amplitudes()).norm())
                    .fold(0.0, f64::max);
                let r = contraction_residual(&obj, psi).unwrap();
                assert_eq!(r < DEFAULT_TOL, overlap < 1e-12, "{stats:?} {:?}", psi.amplitudes());
            }
        }
    }

    #[test]
    fn mixed_extension_weights_components() {
        let s = space(3);
        let env = product_environment(&s, Statistics::Boson, &[("atom", vec![0])]).unwrap();
        let e1 = StateVector::basis(&s, 0).unwrap();
        let e2 = StateVector::basis(&s, 1).unwrap();
        let mix = DensityOperator::mixture(&s, &[(0.25, &e1), (0.75, &e2)]).unwrap();
        let r = has_separation_status_mixed(&mix, &env, DEFAULT_TOL).unwrap();
        assert!((r.objects[0].residual - 0.25).abs() < 1e-12);
        let pure = DensityOperator::from_pure(&e2);
        assert!(has_separation_status_mixed(&pure, &env, DEFAULT_TOL).unwrap().separated);
    }

    #[test]
    fn overlap_examples() {
        let s = space(3);
        let psi = StateVector::basis(&s, 0).unwrap();
        let same = overlap_decompose(&psi, &psi).unwrap();
        assert!((same.c1 - C64::new(1.0, 0.0)).norm() < 1e-15 && same.c2 == 0.0 && same.psi_perp.is_none());

        let chi = StateVector::basis(&s, 2).unwrap();
        let perp = overlap_decompose(&chi, &psi).unwrap();
        assert!(perp.c1.norm() < 1e-15 && (perp.c2 - 1.0).abs() < 1e-15);

        let phi = StateVector::from_real(&s, &[1.0, 0.0, 1.0]).unwrap();
        let dec = overlap_decompose(&phi, &psi).unwrap();
        let h = 0.5f64.sqrt();
        assert!((dec.c1.re - h).abs() < 1e-12 && (dec.c2 - h).abs() < 1e-12);
        let pp = dec.psi_perp.unwrap();
        assert!((pp.inner(&chi).norm() - 1.0).abs() < 1e-12);
        assert!(pp.inner(&psi).norm() < 1e-12);
        let rebuilt = psi.amplitudes() * dec.c1 + pp.amplitudes() * C64::new(dec.c2, 0.0);
        assert!((rebuilt - phi.amplitudes()).norm() < 1e-12);
    }
}
