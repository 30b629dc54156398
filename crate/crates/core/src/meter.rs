//! Meters: spectral measures, registered subspaces and registration statistics.
//!
//! A meter couples an observable with the projector `Pi_ss` onto the subspace
//! it reacts to. Its effects are `Pi_ss Pi(X) Pi_ss`, which sum to `Pi_ss`
//! rather than to the identity; the missing probability `1 - tr(T Pi_ss)` is
//! reported as an explicit no-response channel instead of being renormalized
//! away.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    effect_probability, hermitian_eigen, hermiticity_defect, max_norm, spectral_decompose, tol, CMatrix, CVector,
    DensityOperator, HermitianObservable, Projector, SpectralDecomposition, StateVector, C64,
};
use crate::report::fmt_f64;

/// A finite union of half-open intervals `[a, b)`, kept sorted and disjoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BorelSet {
    intervals: Vec<(f64, f64)>,
}

impl BorelSet {
    pub fn empty() -> Self {
        Self { intervals: Vec::new() }
    }

    pub fn real_line() -> Self {
        Self {
            intervals: vec![(f64::NEG_INFINITY, f64::INFINITY)],
        }
    }

    /// `[a, b)`; empty when `a >= b`.
    pub fn interval(a: f64, b: f64) -> Self {
        Self::from_intervals([(a, b)])
    }

    /// `[x - h, x + h)`, a window isolating a single eigenvalue.
    pub fn around(x: f64, half_width: f64) -> Self {
        Self::interval(x - half_width, x + half_width)
    }

    pub fn from_intervals(intervals: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut v: Vec<(f64, f64)> = intervals.into_iter().filter(|(a, b)| a < b).collect();
        v.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for (a, b) in v {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        Self { intervals: merged }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= x && x < b)
    }

    pub fn union(&self, other: &BorelSet) -> BorelSet {
        Self::from_intervals(self.intervals.iter().chain(&other.intervals).copied())
    }

    pub fn intersects(&self, other: &BorelSet) -> bool {
        self.intervals
            .iter()
            .any(|&(a, b)| other.intervals.iter().any(|&(c, e)| a.max(c) < b.min(e)))
    }
}

/// `X -> Pi(X) = sum_{o_k in X} Pi_k`.
#[derive(Clone, Debug)]
pub struct SpectralMeasure {
    decomposition: SpectralDecomposition,
}

impl SpectralMeasure {
    pub fn new(decomposition: SpectralDecomposition) -> Self {
        Self { decomposition }
    }

    pub fn of(observable: &HermitianObservable) -> Self {
        Self::new(spectral_decompose(observable, None))
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.decomposition
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.decomposition.eigenvalues()
    }

    pub fn dim(&self) -> usize {
        self.decomposition.dim()
    }

    pub fn projector(&self, set: &BorelSet) -> Projector {
        let d = self.dim();
        let mut m = CMatrix::zeros(d, d);
        for (o, p) in self.eigenvalues().iter().zip(self.decomposition.projectors()) {
            if set.contains(*o) {
                m += p.matrix();
            }
        }
        // a sum of mutually orthogonal eigenprojectors is a projector
        Projector::new(m).expect("sum of orthogonal eigenprojectors")
    }

    /// The eigenprojector of eigenvalue index `k` (ascending order).
    pub fn eigenprojector(&self, k: usize) -> Result<&Projector> {
        self.decomposition.projectors().get(k).ok_or(Error::IndexOutOfRange {
            index: k,
            len: self.decomposition.len(),
        })
    }

    /// `sum_k o_k Pi_k`.
    pub fn observable_matrix(&self) -> CMatrix {
        self.decomposition.reconstruct()
    }
}

/// Coarse-grains a measure onto a partition of the real line.
///
/// Cell `l` (one-based) becomes eigenvalue `l` of the new observable with
/// projector `Pi(X_l)`. Cells that contain no eigenvalue carry no projector.
pub fn coarse_grain(measure: &SpectralMeasure, partition: &[BorelSet]) -> Result<SpectralMeasure> {
    for (i, a) in partition.iter().enumerate() {
        for b in &partition[i + 1..] {
            if a.intersects(b) {
                return Err(Error::OverlappingCells);
            }
        }
    }
    if let Some(&o) = measure
        .eigenvalues()
        .iter()
        .find(|&&o| !partition.iter().any(|cell| cell.contains(o)))
    {
        return Err(Error::SpectrumNotCovered { eigenvalue: o });
    }
    let mut eigenvalues = Vec::new();
    let mut projectors = Vec::new();
    for (l, cell) in partition.iter().enumerate() {
        let p = measure.projector(cell);
        if p.rank() > 0 {
            eigenvalues.push((l + 1) as f64);
            projectors.push(p);
        }
    }
    Ok(SpectralMeasure::new(SpectralDecomposition::from_parts(
        eigenvalues,
        projectors,
    )))
}

/// Which part of the Hilbert space a meter reacts to.
#[derive(Clone, Debug)]
pub enum Registered {
    /// Reacts to every state: `Pi_ss = 1`.
    Complete,
    /// `Pi_ss = sum_k Pi_k` over zero-based indices into the ascending spectrum.
    EigenIndices(Vec<usize>),
    /// An explicit registered-subspace projector, validated on construction.
    Subspace(CMatrix),
}

/// Per-state amplitude bound `max_{lambda in forbidden} |psi(lambda)|^2 < eps'`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainPredicate {
    forbidden: Vec<usize>,
    eps_prime: f64,
}

pub fn amplitude_bound_predicate(forbidden: Vec<usize>, eps_prime: f64) -> Result<DomainPredicate> {
    if eps_prime.is_nan() || eps_prime <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eps' must be positive, got {eps_prime}"
        )));
    }
    Ok(DomainPredicate { forbidden, eps_prime })
}

impl DomainPredicate {
    pub fn forbidden(&self) -> &[usize] {
        &self.forbidden
    }

    pub fn eps_prime(&self) -> f64 {
        self.eps_prime
    }

    /// `max_{lambda in forbidden} |v(lambda)|^2`, zero for an empty set.
    pub fn forbidden_weight(&self, v: &CVector) -> f64 {
        self.forbidden
            .iter()
            .filter_map(|&i| v.get(i))
            .map(|z| z.norm_sqr())
            .fold(0.0, f64::max)
    }

    pub fn admits(&self, state: &StateVector) -> bool {
        self.forbidden_weight(state.amplitudes()) < self.eps_prime
    }

    /// Mixed states are judged by their position density `T(lambda, lambda)`.
    pub fn admits_density(&self, state: &DensityOperator) -> bool {
        let m = state.matrix();
        self.forbidden
            .iter()
            .filter(|&&i| i < m.nrows())
            .map(|&i| m[(i, i)].re)
            .fold(0.0, f64::max)
            < self.eps_prime
    }

    /// `max_{lambda in forbidden} |c psi(lambda) + c' phi(lambda)|^2`. For two
    /// admitted states and `|c|^2 + |c'|^2 = 1` this stays below `2 eps'`
    /// (Cauchy-Schwarz) but can exceed `eps'`.
    pub fn combination_weight(&self, c: C64, psi: &StateVector, c_prime: C64, phi: &StateVector) -> f64 {
        let v = psi.amplitudes() * c + phi.amplitudes() * c_prime;
        self.forbidden_weight(&v)
    }
}

#[derive(Clone, Debug)]
pub struct Meter {
    name: String,
    observable: HermitianObservable,
    measure: SpectralMeasure,
    pi_ss: Projector,
    predicate: Option<DomainPredicate>,
}

pub fn build_meter(name: &str, observable: &HermitianObservable, registered: Registered) -> Result<Meter> {
    Meter::with_measure(name, observable.clone(), SpectralMeasure::of(observable), registered)
}

impl Meter {
    /// Meter over an explicit measure, e.g. a coarse-grained one.
    pub fn with_measure(
        name: &str,
        observable: HermitianObservable,
        measure: SpectralMeasure,
        registered: Registered,
    ) -> Result<Meter> {
        let d = measure.dim();
        let pi_ss = match registered {
            Registered::Complete => Projector::identity(d),
            Registered::EigenIndices(indices) => {
                let mut m = CMatrix::zeros(d, d);
                let mut seen = vec![false; measure.eigenvalues().len()];
                for k in indices {
                    let p = measure.eigenprojector(k)?;
                    if !std::mem::replace(&mut seen[k], true) {
                        m += p.matrix();
                    }
                }
                Projector::new(m)?
            }
            Registered::Subspace(m) => {
                if m.nrows() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: m.nrows(),
                    });
                }
                Projector::new(m)?
            }
        };
        Ok(Meter {
            name: name.to_string(),
            observable,
            measure,
            pi_ss,
            predicate: None,
        })
    }

    pub fn with_predicate(mut self, predicate: DomainPredicate) -> Self {
        self.predicate = Some(predicate);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn observable(&self) -> &HermitianObservable {
        &self.observable
    }

    pub fn measure(&self) -> &SpectralMeasure {
        &self.measure
    }

    pub fn pi_ss(&self) -> &Projector {
        &self.pi_ss
    }

    pub fn predicate(&self) -> Option<&DomainPredicate> {
        self.predicate.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.pi_ss.dim()
    }

    pub fn is_complete(&self) -> bool {
        self.pi_ss.is_identity(tol::PROJECTOR)
    }

    /// Eigenvalue indices whose eigenprojectors lie inside `H_ss`.
    pub fn registered_indices(&self) -> Vec<usize> {
        self.measure
            .decomposition()
            .projectors()
            .iter()
            .enumerate()
            .filter(|(_, p)| max_norm(&(self.pi_ss.matrix() * p.matrix() - p.matrix())) < 1e-8)
            .map(|(k, _)| k)
            .collect()
    }
}

/// An operator `0 <= E <= 1`.
#[derive(Clone, Debug)]
pub struct Effect(CMatrix);

impl Effect {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let deviation = hermiticity_defect(&matrix);
        if deviation > tol::HERMITIAN {
            return Err(Error::NotHermitian { deviation });
        }
        let (values, _) = hermitian_eigen(&matrix);
        for &v in [values[0], values[values.len() - 1]].iter() {
            if !(-tol::PROBABILITY..=1.0 + tol::PROBABILITY).contains(&v) {
                return Err(Error::NotEffect { eigenvalue: v });
            }
        }
        Ok(Self(matrix))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }
}

/// `Pi_ss Pi(X) Pi_ss`.
pub fn truncated_effect(meter: &Meter, set: &BorelSet) -> Effect {
    let p = meter.pi_ss.matrix();
    let m = p * meter.measure.projector(set).matrix() * p;
    // roundoff leaves ~1e-17 anti-Hermitian residue; strip it
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    Effect::new(m).expect("compression of a projector by a projector is an effect")
}

/// The truncated effect of a single eigenvalue index.
pub fn eigen_effect(meter: &Meter, k: usize) -> Result<Effect> {
    let p = meter.pi_ss.matrix();
    let m = p * meter.measure.eigenprojector(k)?.matrix() * p;
    let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    Effect::new(m)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeProbability {
    pub index: usize,
    pub value: f64,
    pub probability: f64,
}

/// Per-eigenvalue registration probabilities plus the no-response deficit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegisteredDistribution {
    pub outcomes: Vec<OutcomeProbability>,
    pub no_response: f64,
}

impl RegisteredDistribution {
    pub fn registered_total(&self) -> f64 {
        self.outcomes.iter().map(|o| o.probability).sum()
    }

    /// Distribution conditioned on a response, `None` when the meter never responds.
    pub fn post_selected(&self) -> Option<Vec<f64>> {
        let total = self.registered_total();
        (total > tol::PROBABILITY).then(|| self.outcomes.iter().map(|o| o.probability / total).collect())
    }

    pub fn probability_of(&self, index: usize) -> f64 {
        self.outcomes
            .iter()
            .find(|o| o.index == index)
            .map(|o| o.probability)
            .unwrap_or(0.0)
    }
}

pub fn registered_distribution(meter: &Meter, state: &DensityOperator) -> Result<RegisteredDistribution> {
    if state.dim() != meter.dim() {
        return Err(Error::DimensionMismatch {
            expected: meter.dim(),
            found: state.dim(),
        });
    }
    let mut outcomes = Vec::with_capacity(meter.measure.eigenvalues().len());
    for (k, &value) in meter.measure.eigenvalues().iter().enumerate() {
        let e = eigen_effect(meter, k)?;
        outcomes.push(OutcomeProbability {
            index: k,
            value,
            probability: effect_probability(state, e.matrix())?,
        });
    }
    let responded = effect_probability(state, meter.pi_ss.matrix())?;
    Ok(RegisteredDistribution {
        outcomes,
        no_response: (1.0 - responded).clamp(0.0, 1.0),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainClass {
    InDomain,
    Null,
    Partial,
}

/// In-domain iff `T = Pi_ss T Pi_ss` (and the predicate, if any, admits `T`);
/// null iff `tr(T Pi_ss)` vanishes.
pub fn classify_state(meter: &Meter, state: &DensityOperator) -> Result<DomainClass> {
    if state.dim() != meter.dim() {
        return Err(Error::DimensionMismatch {
            expected: meter.dim(),
            found: state.dim(),
        });
    }
    let p = meter.pi_ss.matrix();
    let t = state.matrix();
    let compressed = p * t * p;
    let in_subspace = max_norm(&(t - compressed)) < 1e-10;
    let responded = crate::linalg::trace_product(t, p).re;
    if responded < 1e-10 {
        return Ok(DomainClass::Null);
    }
    let admitted = meter.predicate.as_ref().is_none_or(|pred| pred.admits_density(state));
    Ok(if in_subspace && admitted {
        DomainClass::InDomain
    } else {
        DomainClass::Partial
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutcomeCount {
    pub value: f64,
    pub count: u64,
}

/// Counts of registrations over `shots` seeded draws.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrequencyRecord {
    pub meter: String,
    pub outcomes: Vec<OutcomeCount>,
    pub no_response: u64,
    pub shots: u64,
    pub seed: u64,
}

impl FrequencyRecord {
    pub fn frequency(&self, outcome: usize) -> f64 {
        self.outcomes[outcome].count as f64 / self.shots as f64
    }

    pub fn no_response_frequency(&self) -> f64 {
        self.no_response as f64 / self.shots as f64
    }

    /// `outcome,count,frequency`, one row per eigenvalue, then a `no_response` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("outcome,count,frequency\n");
        for o in &self.outcomes {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_f64(o.value),
                o.count,
                fmt_f64(o.count as f64 / self.shots as f64)
            ));
        }
        out.push_str(&format!(
            "no_response,{},{}\n",
            self.no_response,
            fmt_f64(self.no_response_frequency())
        ));
        out
    }

    /// Metadata written next to the CSV.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "meter": self.meter,
            "seed": self.seed,
            "shots": self.shots,
        })
    }
}

/// Probabilities below this are treated as roundoff and never drawn.
const ROUNDOFF_FLOOR: f64 = 1e-14;
const CHUNK: u64 = 4096;

/// Draws `shots` outcomes from `weights` (last channel = no response). Shot `i`
/// uses the ChaCha8 stream of `seed` at word offset `2 i`, so the record does not
/// depend on how shots are split across threads.
pub fn sample_channels(weights: &[f64], shots: u64, seed: u64) -> Vec<u64> {
    let cleaned: Vec<f64> = weights
        .iter()
        .map(|&w| if w < ROUNDOFF_FLOOR { 0.0 } else { w })
        .collect();
    let total: f64 = cleaned.iter().sum();
    let mut cdf = Vec::with_capacity(cleaned.len());
    let mut acc = 0.0;
    for w in &cleaned {
        acc += w / total;
        cdf.push(acc);
    }
    let last_live = cleaned.iter().rposition(|&w| w > 0.0).unwrap_or(cleaned.len() - 1);
    let channels = cleaned.len();
    let chunks = shots.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(shots);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_word_pos(2 * start as u128);
            let mut counts = vec![0u64; channels];
            for _ in start..end {
                let u: f64 = rng.random();
                let k = cdf.iter().position(|&c| u < c).unwrap_or(last_live);
                counts[k.min(last_live)] += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; channels],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

pub fn sample_registrations(meter: &Meter, state: &DensityOperator, shots: u64, seed: u64) -> Result<FrequencyRecord> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be at least 1".into()));
    }
    let dist = registered_distribution(meter, state)?;
    let mut weights: Vec<f64> = dist.outcomes.iter().map(|o| o.probability).collect();
    weights.push(dist.no_response);
    let counts = sample_channels(&weights, shots, seed);
    let (no_response, registered) = counts.split_last().expect("at least the no-response channel");
    Ok(FrequencyRecord {
        meter: meter.name.clone(),
        outcomes: dist
            .outcomes
            .iter()
            .zip(registered)
            .map(|(o, &count)| OutcomeCount { value: o.value, count })
            .collect(),
        no_response: *no_response,
        shots,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diagonal, outer, HilbertSpace};

    fn model_meter() -> (HilbertSpace, Meter) {
        let s = HilbertSpace::new(3).unwrap();
        let o = HermitianObservable::diagonal(&s, &[1.0, 2.0, 3.0]).unwrap();
        let m = build_meter("model", &o, Registered::EigenIndices(vec![0, 1])).unwrap();
        (s, m)
    }

    #[test]
    fn borel_set_canonical_form() {
        let x = BorelSet::from_intervals([(3.0, 4.0), (0.0, 1.0), (0.5, 2.0), (5.0, 5.0)]);
        assert_eq!(x.intervals(), &[(0.0, 2.0), (3.0, 4.0)]);
        assert!(x.contains(0.0) && !x.contains(2.0) && x.contains(3.5));
        assert!(!BorelSet::interval(0.0, 1.0).intersects(&BorelSet::interval(1.0, 2.0)));
        assert!(BorelSet::real_line().contains(-1e300));
    }

    #[test]
    fn build_meter_examples() {
        let (_, m) = model_meter();
        assert!(max_norm(&(m.pi_ss().matrix() - diagonal(&[1.0, 1.0, 0.0]))) < 1e-12);
        assert!(!m.is_complete());
        assert_eq!(m.registered_indices(), vec![0, 1]);

        let s = HilbertSpace::new(3).unwrap();
        let o = HermitianObservable::diagonal(&s, &[1.0, 2.0, 3.0]).unwrap();
        let full = build_meter("full", &o, Registered::EigenIndices(vec![0, 1, 2])).unwrap();
        assert!(full.is_complete());
        let bad = build_meter("bad", &o, Registered::Subspace(diagonal(&[1.0, 0.5, 0.0])));
        assert!(matches!(bad, Err(Error::NotProjector { .. })));
        assert!(build_meter("oob", &o, Registered::EigenIndices(vec![3])).is_err());
    }

    #[test]
    fn spectral_measure_normalization_and_additivity() {
        let (_, m) = model_meter();
        let all = m.measure().projector(&BorelSet::real_line());
        assert!(all.is_identity(1e-10));
        let a = BorelSet::interval(0.0, 1.5);
        let b = BorelSet::interval(1.5, 2.5);
        let sum = m.measure().projector(&a).matrix() + m.measure().projector(&b).matrix();
        assert!(max_norm(&(sum - m.measure().projector(&a.union(&b)).matrix())) < 1e-12);
    }

    #[test]
    fn coarse_grain_examples() {
        let (s, m) = model_meter();
        let cg = coarse_grain(
            m.measure(),
            &[BorelSet::interval(0.0, 2.5), BorelSet::interval(2.5, 9.0)],
        )
        .unwrap();
        assert_eq!(cg.eigenvalues(), &[1.0, 2.0]);
        let p = cg.decomposition().projectors();
        assert!(max_norm(&(p[0].matrix() - diagonal(&[1.0, 1.0, 0.0]))) < 1e-12);
        assert!(max_norm(&(p[1].matrix() - diagonal(&[0.0, 0.0, 1.0]))) < 1e-12);

        let single = coarse_grain(m.measure(), &[BorelSet::real_line()]).unwrap();
        assert!(max_norm(&(single.observable_matrix() - crate::linalg::identity(3))) < 1e-12);

        assert!(matches!(
            coarse_grain(
                m.measure(),
                &[BorelSet::interval(0.0, 2.5), BorelSet::interval(2.0, 9.0)]
            ),
            Err(Error::OverlappingCells)
        ));
        assert!(matches!(
            coarse_grain(m.measure(), &[BorelSet::interval(0.0, 2.5)]),
            Err(Error::SpectrumNotCovered { .. })
        ));
        let _ = s;
    }

    #[test]
    fn truncated_effect_examples() {
        let (_, m) = model_meter();
        let e1 = truncated_effect(&m, &BorelSet::around(1.0, 0.1));
        assert!(max_norm(&(e1.matrix() - diagonal(&[1.0, 0.0, 0.0]))) < 1e-12);
        let e3 = truncated_effect(&m, &BorelSet::around(3.0, 0.1));
        assert!(max_norm(e3.matrix()) < 1e-12);
        let all = truncated_effect(&m, &BorelSet::real_line());
        assert!(max_norm(&(all.matrix() - m.pi_ss().matrix())) < 1e-12);
    }

    #[test]
    fn effect_rejects_spectrum_outside_unit_interval() {
        assert!(matches!(
            Effect::new(diagonal(&[1.5, 0.0])),
            Err(Error::NotEffect { .. })
        ));
        assert!(Effect::new(diagonal(&[0.3, 0.7])).is_ok());
    }

    #[test]
    fn registered_distribution_examples() {
        let (s, m) = model_meter();
        let c = [0.6f64, 0.8];
        let psi = StateVector::from_real(&s, &[c[0], c[1], 0.0]).unwrap();
        let d = registered_distribution(&m, &psi.density()).unwrap();
        assert!((d.probability_of(0) - 0.36).abs() < 1e-12);
        assert!((d.probability_of(1) - 0.64).abs() < 1e-12);
        assert!(d.no_response.abs() < 1e-12);

        let outside = StateVector::basis(&s, 2).unwrap();
        let d = registered_distribution(&m, &outside.density()).unwrap();
        assert!(d.registered_total().abs() < 1e-15);
        assert!((d.no_response - 1.0).abs() < 1e-15);
        assert!(d.post_selected().is_none());

        let split = StateVector::from_real(&s, &[1.0, 0.0, 1.0]).unwrap();
        let d = registered_distribution(&m, &split.density()).unwrap();
        assert!((d.probability_of(0) - 0.5).abs() < 1e-12);
        assert!((d.no_response - 0.5).abs() < 1e-12);
        assert_eq!(d.post_selected().unwrap()[0], 1.0);
    }

    #[test]
    fn classify_examples() {
        let (s, m) = model_meter();
        let inside = StateVector::from_real(&s, &[1.0, 1.0, 0.0]).unwrap();
        assert_eq!(classify_state(&m, &inside.density()).unwrap(), DomainClass::InDomain);
        let outside = StateVector::basis(&s, 2).unwrap();
        assert_eq!(classify_state(&m, &outside.density()).unwrap(), DomainClass::Null);
        let a = StateVector::basis(&s, 0).unwrap();
        let mix = DensityOperator::mixture(&s, &[(0.5, &a), (0.5, &outside)]).unwrap();
        assert_eq!(classify_state(&m, &mix).unwrap(), DomainClass::Partial);
    }

    #[test]
    fn predicate_restricts_domain() {
        let s = HilbertSpace::new(4).unwrap();
        let o = HermitianObservable::diagonal(&s, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        let pred = amplitude_bound_predicate(vec![0], 0.2).unwrap();
        let m = build_meter("sg", &o, Registered::Complete)
            .unwrap()
            .with_predicate(pred.clone());
        let uniform = StateVector::from_real(&s, &[1.0; 4]).unwrap();
        // |psi(0)|^2 = 0.25 >= 0.2
        assert!(!pred.admits(&uniform));
        assert_eq!(classify_state(&m, &uniform.density()).unwrap(), DomainClass::Partial);
        let away = StateVector::from_real(&s, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!(pred.admits(&away));
        assert!(amplitude_bound_predicate(vec![0], 0.0).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_concentrated() {
        let (s, m) = model_meter();
        let e1 = StateVector::basis(&s, 0).unwrap();
        let r = sample_registrations(&m, &e1.density(), 1000, 9).unwrap();
        assert_eq!(r.outcomes[0].count, 1000);
        assert_eq!(r.no_response, 0);

        let psi = StateVector::from_real(&s, &[0.5, 0.75f64.sqrt(), 0.0]).unwrap();
        let shots = 100_000;
        let a = sample_registrations(&m, &psi.density(), shots, 2024).unwrap();
        let b = sample_registrations(&m, &psi.density(), shots, 2024).unwrap();
        assert_eq!(a, b);
        let sigma = (0.25f64 * 0.75 / shots as f64).sqrt();
        assert!((a.frequency(0) - 0.25).abs() < 4.0 * sigma);
        let total: u64 = a.outcomes.iter().map(|o| o.count).sum::<u64>() + a.no_response;
        assert_eq!(total, shots);
        assert!(sample_registrations(&m, &psi.density(), 0, 1).is_err());
    }

    #[test]
    fn sampling_independent_of_chunking() {
        // one chunk versus many must give the same per-shot draws
        let w = [0.3, 0.2, 0.5];
        let small = sample_channels(&w, CHUNK - 1, 5);
        let mut serial = vec![0u64; 3];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..CHUNK - 1 {
            let u: f64 = rng.random();
            let k = if u < 0.3 {
                0
            } else if u < 0.5 {
                1
            } else {
                2
            };
            serial[k] += 1;
        }
        assert_eq!(small, serial);
        let big = sample_channels(&w, 3 * CHUNK + 17, 5);
        let mut serial = vec![0u64; 3];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 * CHUNK + 17 {
            let u: f64 = rng.random();
            let k = if u < 0.3 {
                0
            } else if u < 0.5 {
                1
            } else {
                2
            };
            serial[k] += 1;
        }
        assert_eq!(big, serial);
    }

    #[test]
    fn frequency_record_csv() {
        let (s, m) = model_meter();
        let r = sample_registrations(&m, &StateVector::basis(&s, 2).unwrap().density(), 10, 1).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "outcome,count,frequency");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("no_response,10,"));
        assert_eq!(r.sidecar()["shots"], 10);
        let _ = outer;
    }
}
