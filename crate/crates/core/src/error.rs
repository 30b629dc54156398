use thiserror::Error;

use crate::separation::SeparationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Hilbert space: {0}")]
    InvalidSpace(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max |A - A^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("vector is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("cannot normalize a vector of norm {norm:e}")]
    ZeroVector { norm: f64 },

    #[error("operator is not positive semidefinite (min eigenvalue = {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("trace is {trace}, expected 1")]
    NotTraceOne { trace: f64 },

    #[error("matrix is not an orthogonal projector (deviation {deviation:e})")]
    NotProjector { deviation: f64 },

    #[error("operator is not an effect (spectrum leaves [0, 1], eigenvalue {eigenvalue})")]
    NotEffect { eigenvalue: f64 },

    #[error("probability {0} lies outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("expectation value has imaginary residue {0:e}")]
    ImaginaryResidue(f64),

    #[error("tau-symmetrized projection vanishes (norm {norm:e})")]
    ZeroSymmetrization { norm: f64 },

    #[error("state is not tau-symmetric (defect {defect:e})")]
    NotSymmetric { defect: f64 },

    #[error("slot {slot} out of range for {particles} particles")]
    SlotOutOfRange { slot: usize, particles: usize },

    #[error("mode {mode} out of range for {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },

    #[error("creation on mode {mode} exceeds the occupation cutoff {cutoff}")]
    CutoffExceeded { mode: usize, cutoff: usize },

    #[error("statistics mismatch: {0}")]
    StatisticsMismatch(String),

    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("partition cells overlap")]
    OverlappingCells,

    #[error("eigenvalue {eigenvalue} is not covered by the partition")]
    SpectrumNotCovered { eigenvalue: f64 },

    #[error("recovery projection vanishes (norm {norm:e}); separation status violated")]
    RecoveryDegenerate { norm: f64 },

    #[error("preparation lacks separation status: {}", .0.summary())]
    PreparationViolation(Box<SeparationReport>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
