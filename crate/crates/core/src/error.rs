use thiserror::Error;

/// Errors raised by the intervention engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Zero apparatus variance: the posterior is a point mass and every
    /// C-dependent quantity must be taken in its C → ∞ limit.
    #[error("ideal-limit measurement (zero apparatus variance); use the limit-form operation")]
    IdealLimit,

    #[error("degenerate measurement: sharpness C = {sharpness} carries no information")]
    DegenerateMeasurement { sharpness: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("grid leakage: {mass:.3e} of the mass lies in the outer 5% of the grid (limit 1e-6)")]
    Leakage { mass: f64 },

    #[error("under-resolved density: standard deviation {std_dev:.3e} is below half the grid spacing {spacing:.3e}")]
    Unresolved { std_dev: f64, spacing: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("joint grid of {points}x{points} cells exceeds the cap of {cap} points per axis (would need {bytes} bytes)")]
    GridTooLarge { points: usize, cap: usize, bytes: usize },

    #[error("outcome incompatible with the state: P(x) = {probability:.3e}")]
    IncompatibleOutcome { probability: f64 },

    #[error("too few trials for statistical power: {requested} < {minimum}")]
    InsufficientTrials { requested: usize, minimum: usize },

    #[error("configuration mismatch: {0}")]
    ConfigurationMismatch(String),

    #[error("truncation leakage: population {population:.3e} in the top {levels} Fock levels exceeds 1e-8")]
    TruncationLeakage { population: f64, levels: usize },

    #[error("outcome probability {probability:.3e} too small to condition on")]
    NegligibleOutcome { probability: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("map is not trace preserving: deviation {deviation:.3e}")]
    NotTracePreserving { deviation: f64 },

    #[error("unphysical covariance matrix: smallest symplectic eigenvalue {min_eigenvalue} < 1/2")]
    Unphysical { min_eigenvalue: f64 },

    #[error("matrix is not symplectic: max |SΩSᵀ − Ω| = {deviation:.3e}")]
    NotSymplectic { deviation: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
