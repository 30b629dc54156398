use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, HermitianObservable, HilbertSpace, StateVector, C64};
use crate::meter::{amplitude_bound_predicate, build_meter, DomainPredicate, Meter, Registered};
use crate::multiparticle::{symmetrize, MultiState, Statistics, SymmetrySector};
use crate::separation::{Environment, EnvironmentObject};

/// One scenario per file. Kind-specific fields sit next to the common ones.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_shots")]
    pub shots: u64,
    /// Overrides the threshold of every exact-identity check when set.
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default = "default_separation_tol")]
    pub separation_tolerance: f64,
    /// Run even if the preparation lacks separation status.
    #[serde(default)]
    pub allow_violation: bool,
    /// The scenario is meant to exhibit a violation; implies `allow_violation`.
    #[serde(default)]
    pub expect_violation: bool,
    #[serde(flatten)]
    pub spec: ScenarioSpec,
}

fn default_seed() -> u64 {
    1
}

fn default_shots() -> u64 {
    10_000
}

fn default_separation_tol() -> f64 {
    crate::separation::DEFAULT_TOL
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioSpec {
    TwoLab(TwoLabConfig),
    DetectorGrid(DetectorGridConfig),
    Equivalence(EquivalenceConfig),
    Dynamics(DynamicsConfig),
    SeparationCheck(SeparationCheckConfig),
}

impl ScenarioSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioSpec::TwoLab(_) => "two_lab",
            ScenarioSpec::DetectorGrid(_) => "detector_grid",
            ScenarioSpec::Equivalence(_) => "equivalence",
            ScenarioSpec::Dynamics(_) => "dynamics",
            ScenarioSpec::SeparationCheck(_) => "separation_check",
        }
    }
}

pub const KINDS: [&str; 5] = [
    "two_lab",
    "detector_grid",
    "equivalence",
    "dynamics",
    "separation_check",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticsChoice {
    Boson,
    Fermion,
    Both,
}

impl StatisticsChoice {
    pub fn expand(self) -> Vec<Statistics> {
        match self {
            StatisticsChoice::Boson => vec![Statistics::Boson],
            StatisticsChoice::Fermion => vec![Statistics::Fermion],
            StatisticsChoice::Both => Statistics::both().to_vec(),
        }
    }
}

/// A real amplitude or a `[re, im]` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amplitude {
    Real(f64),
    Complex([f64; 2]),
}

impl Amplitude {
    fn value(self) -> C64 {
        match self {
            Amplitude::Real(x) => C64::new(x, 0.0),
            Amplitude::Complex([re, im]) => C64::new(re, im),
        }
    }
}

/// A single-particle state: a basis index or (unnormalized) amplitudes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSpec {
    Basis(usize),
    Amplitudes(Vec<Amplitude>),
}

impl StateSpec {
    pub fn build(&self, space: &HilbertSpace) -> Result<StateVector> {
        match self {
            StateSpec::Basis(k) => StateVector::basis(space, *k)
                .map_err(|_| Error::Config(format!("basis index {k} out of range for dimension {}", space.dim()))),
            StateSpec::Amplitudes(a) => {
                if a.len() != space.dim() {
                    return Err(Error::Config(format!(
                        "state has {} amplitudes, dimension is {}",
                        a.len(),
                        space.dim()
                    )));
                }
                let v = CVector::from_iterator(a.len(), a.iter().map(|x| x.value()));
                StateVector::normalized(space, v).map_err(|e| Error::Config(format!("state: {e}")))
            }
        }
    }
}

/// Diagonal observable plus the basis indices the meter reacts to.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeterSpec {
    pub observable: Vec<f64>,
    /// Basis indices spanning the registered subspace; omitted means complete.
    #[serde(default)]
    pub registered: Option<Vec<usize>>,
    #[serde(default)]
    pub predicate: Option<PredicateSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PredicateSpec {
    pub forbidden: Vec<usize>,
    pub eps_prime: f64,
}

impl PredicateSpec {
    pub fn build(&self, dim: usize) -> Result<DomainPredicate> {
        check_indices("predicate.forbidden", &self.forbidden, dim)?;
        amplitude_bound_predicate(self.forbidden.clone(), self.eps_prime).map_err(|e| Error::Config(e.to_string()))
    }
}

impl MeterSpec {
    pub fn build(&self, name: &str, space: &HilbertSpace) -> Result<Meter> {
        let d = space.dim();
        if self.observable.len() != d {
            return Err(Error::Config(format!(
                "observable has {} eigenvalues, dimension is {d}",
                self.observable.len()
            )));
        }
        let o = HermitianObservable::diagonal(space, &self.observable)?;
        let registered = match &self.registered {
            None => Registered::Complete,
            Some(idx) => {
                check_indices("meter.registered", idx, d)?;
                let mut diag = vec![0.0; d];
                for &i in idx {
                    diag[i] = 1.0;
                }
                Registered::Subspace(crate::linalg::diagonal(&diag))
            }
        };
        let mut meter = build_meter(name, &o, registered)?;
        if let Some(p) = &self.predicate {
            meter = meter.with_predicate(p.build(d)?);
        }
        Ok(meter)
    }
}

/// An environment object: the tau-symmetrized product of its factors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub label: String,
    pub factors: Vec<StateSpec>,
}

pub fn build_environment(objects: &[ObjectSpec], space: &HilbertSpace, statistics: Statistics) -> Result<Environment> {
    let mut out = Vec::with_capacity(objects.len());
    for o in objects {
        if o.factors.is_empty() {
            return Err(Error::Config(format!(
                "environment object {} has no particles",
                o.label
            )));
        }
        let states = o.factors.iter().map(|f| f.build(space)).collect::<Result<Vec<_>>>()?;
        let refs: Vec<&StateVector> = states.iter().collect();
        let obj = EnvironmentObject::symmetrized_product(&o.label, statistics, &refs)
            .map_err(|e| Error::Config(format!("environment object {}: {e}", o.label)))?;
        out.push(obj);
    }
    Environment::new(out)
}

/// The environment wave function `Psi` as a single tau-symmetric multi-particle state.
pub fn build_env_state(factors: &[StateSpec], space: &HilbertSpace, statistics: Statistics) -> Result<MultiState> {
    if factors.is_empty() {
        return Err(Error::Config("environment needs at least one particle".into()));
    }
    let states = factors.iter().map(|f| f.build(space)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&StateVector> = states.iter().collect();
    let product = MultiState::product(&refs)?;
    let n = factors.len();
    let sector = SymmetrySector::new(statistics, n, space)?;
    let sym = symmetrize(product.amplitudes(), space.dim(), n, statistics);
    MultiState::normalized_in_sector(&sector, sym)
        .map_err(|e| Error::Config(format!("environment vanishes under {statistics:?} symmetrization: {e}")))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwoLabConfig {
    pub dim: usize,
    pub statistics: StatisticsChoice,
    pub meter: MeterSpec,
    /// Mode prepared in lab A and the remote mode occupied in lab B.
    pub modes: [usize; 2],
    /// Bosonic occupation cutoff of the Fock space.
    #[serde(default = "default_cutoff")]
    pub n_max: usize,
}

fn default_cutoff() -> usize {
    2
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DetectorGridConfig {
    pub cells: usize,
    /// Half-open cell ranges `[start, end)` of the sub-detectors.
    pub detectors: Vec<[usize; 2]>,
    pub states: Vec<GridState>,
    #[serde(default)]
    pub predicate: Option<PredicateSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridState {
    pub label: String,
    /// Uniform wave packet over `[start, end)`.
    #[serde(default)]
    pub support: Option<[usize; 2]>,
    #[serde(default)]
    pub amplitudes: Option<Vec<Amplitude>>,
}

impl GridState {
    pub fn build(&self, space: &HilbertSpace) -> Result<StateVector> {
        match (&self.support, &self.amplitudes) {
            (Some([a, b]), None) => {
                if a >= b || *b > space.dim() {
                    return Err(Error::Config(format!("state {}: bad support [{a}, {b})", self.label)));
                }
                let v: Vec<f64> = (0..space.dim())
                    .map(|i| if (*a..*b).contains(&i) { 1.0 } else { 0.0 })
                    .collect();
                Ok(StateVector::from_real(space, &v)?)
            }
            (None, Some(amps)) => StateSpec::Amplitudes(amps.clone()).build(space),
            _ => Err(Error::Config(format!(
                "state {}: give exactly one of support or amplitudes",
                self.label
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquivalenceConfig {
    #[serde(default)]
    pub instance: Option<EquivalenceInstance>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquivalenceInstance {
    pub dim: usize,
    pub statistics: StatisticsChoice,
    pub environment: Vec<StateSpec>,
    pub psi: StateSpec,
    pub meter: MeterSpec,
}

/// Randomized separated instances; trial `i` draws from stream `i` of the scenario seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepSpec {
    pub trials: u64,
    pub dims: Vec<usize>,
    pub env_particles: Vec<usize>,
    pub statistics: StatisticsChoice,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DynamicsConfig {
    pub dim: usize,
    pub statistics: StatisticsChoice,
    pub environment: Vec<StateSpec>,
    pub psi: StateSpec,
    pub meter: MeterSpec,
    pub hamiltonian: HamiltonianSpec,
    pub times: TimeGrid,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum HamiltonianSpec {
    Zero,
    /// `sum_l h^(l)` for a single-particle Hermitian `h` given as rows of
    /// real entries or `[re, im]` pairs.
    Additive {
        single: Vec<Vec<Amplitude>>,
    },
    /// Random Hamiltonian commuting with slot permutations and every
    /// `Pi_ss^(k)`, drawn from the scenario seed.
    AdmissibleRandom,
}

impl HamiltonianSpec {
    pub fn single_matrix(rows: &[Vec<Amplitude>], dim: usize) -> Result<CMatrix> {
        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Config(format!("hamiltonian.single must be {dim}x{dim}")));
        }
        Ok(CMatrix::from_fn(dim, dim, |r, c| rows[r][c].value()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl TimeGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        let pts = match self {
            TimeGrid::List(v) => v.clone(),
            TimeGrid::Range { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                n => (0..*n)
                    .map(|i| start + (stop - start) * i as f64 / (*n - 1) as f64)
                    .collect(),
            },
        };
        if pts.is_empty() || pts.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("time grid must contain finite times".into()));
        }
        Ok(pts)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeparationCheckConfig {
    pub dim: usize,
    pub statistics: StatisticsChoice,
    pub environment: Vec<ObjectSpec>,
    pub psi: StateSpec,
}

fn check_indices(what: &str, idx: &[usize], dim: usize) -> Result<()> {
    match idx.iter().find(|&&i| i >= dim) {
        Some(i) => Err(Error::Config(format!(
            "{what}: index {i} out of range for dimension {dim}"
        ))),
        None => Ok(()),
    }
}

fn check_dim(dim: usize) -> Result<HilbertSpace> {
    if dim == 0 || dim > 64 {
        return Err(Error::Config(format!("dimension {dim} outside 1..=64")));
    }
    HilbertSpace::new(dim)
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn kind(&self) -> &'static str {
        self.spec.kind()
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind().to_string())
    }

    /// Threshold for an exact-identity check whose default is `default`.
    pub fn tol(&self, default: f64) -> f64 {
        self.tolerance.unwrap_or(default)
    }

    /// Semantic checks beyond the schema: ranges, shapes and referenced indices.
    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::Config("shots must be at least 1".into()));
        }
        if let Some(t) = self.tolerance {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::Config(format!("tolerance must be positive, got {t}")));
            }
        }
        if self.separation_tolerance.is_nan() || self.separation_tolerance <= 0.0 {
            return Err(Error::Config("separation_tolerance must be positive".into()));
        }
        match &self.spec {
            ScenarioSpec::TwoLab(c) => {
                let space = check_dim(c.dim)?;
                check_indices("modes", &c.modes, c.dim)?;
                if c.modes[0] == c.modes[1] {
                    return Err(Error::Config("the two labs must use distinct modes".into()));
                }
                if c.n_max < 2 {
                    return Err(Error::Config("n_max must be at least 2".into()));
                }
                c.meter.build("meter", &space)?;
            }
            ScenarioSpec::DetectorGrid(c) => {
                let space = check_dim(c.cells)?;
                if c.detectors.is_empty() {
                    return Err(Error::Config("at least one detector is required".into()));
                }
                for (i, [a, b]) in c.detectors.iter().enumerate() {
                    if a >= b || *b > c.cells {
                        return Err(Error::Config(format!("detector {i}: bad range [{a}, {b})")));
                    }
                    for [x, y] in &c.detectors[i + 1..] {
                        if a.max(x) < b.min(y) {
                            return Err(Error::Config("detector ranges overlap".into()));
                        }
                    }
                }
                if c.states.is_empty() {
                    return Err(Error::Config("at least one state is required".into()));
                }
                for s in &c.states {
                    s.build(&space)?;
                }
                if let Some(p) = &c.predicate {
                    p.build(c.cells)?;
                }
            }
            ScenarioSpec::Equivalence(c) => {
                if c.instance.is_none() && c.sweep.is_none() {
                    return Err(Error::Config("equivalence needs an instance, a sweep, or both".into()));
                }
                if let Some(i) = &c.instance {
                    let space = check_dim(i.dim)?;
                    i.psi.build(&space)?;
                    i.meter.build("meter", &space)?;
                    for s in i.statistics.expand() {
                        build_env_state(&i.environment, &space, s)?;
                    }
                }
                if let Some(s) = &c.sweep {
                    if s.trials == 0 || s.dims.is_empty() || s.env_particles.is_empty() {
                        return Err(Error::Config("sweep needs trials, dims and env_particles".into()));
                    }
                    if s.dims.iter().any(|&d| !(2..=6).contains(&d)) {
                        return Err(Error::Config("sweep dims must lie in 2..=6".into()));
                    }
                    if s.env_particles.iter().any(|&n| !(1..=3).contains(&n)) {
                        return Err(Error::Config("sweep env_particles must lie in 1..=3".into()));
                    }
                    if super::sweep_cases(s).is_empty() {
                        return Err(Error::Config("sweep admits no separated instance".into()));
                    }
                }
            }
            ScenarioSpec::Dynamics(c) => {
                let space = check_dim(c.dim)?;
                c.psi.build(&space)?;
                c.meter.build("meter", &space)?;
                for s in c.statistics.expand() {
                    build_env_state(&c.environment, &space, s)?;
                }
                if let HamiltonianSpec::Additive { single } = &c.hamiltonian {
                    HamiltonianSpec::single_matrix(single, c.dim)?;
                }
                if crate::multiparticle::product_dim(c.dim, c.environment.len() + 1) > 4096 {
                    return Err(Error::Config("dynamics carrier exceeds 4096 dimensions".into()));
                }
                c.times.points()?;
            }
            ScenarioSpec::SeparationCheck(c) => {
                let space = check_dim(c.dim)?;
                c.psi.build(&space)?;
                for s in c.statistics.expand() {
                    build_environment(&c.environment, &space, s)?;
                }
            }
        }
        Ok(())
    }
}
