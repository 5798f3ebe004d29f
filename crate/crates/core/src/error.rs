use thiserror::Error;

use crate::lie::GroupId;

pub type Result<T, E = FloquetError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FloquetError {
    #[error("context mismatch: expected {expected}, found {found}")]
    Context { expected: GroupId, found: GroupId },

    #[error("group element is off the manifold (residual {residual:.3e} > {tolerance:.3e})")]
    InvalidGroupElement { residual: f64, tolerance: f64 },

    #[error("manifold drift {drift:.3e} exceeds {tolerance:.3e}{}; use a smaller step", fmt_s(*s))]
    Drift {
        s: Option<f64>,
        drift: f64,
        tolerance: f64,
    },

    #[error(
        "finite-difference stencil at index {index} leaves a non-periodic grid of {len} nodes"
    )]
    Boundary { index: usize, len: usize },

    #[error("monodromy is not in the exponential image at s = {s}")]
    UniformReducibilityViolated { s: f64 },

    #[error("ambiguous logarithm branch at s = {s} (candidates {best:.3e} and {runner_up:.3e} away); refine the s-grid")]
    BranchAmbiguity { s: f64, best: f64, runner_up: f64 },

    #[error("logarithm branch jumps by {jump:.3e} at s = {s} (threshold {threshold:.3e}); refine the s-grid")]
    BranchJump { s: f64, jump: f64, threshold: f64 },

    #[error(
        "Floquet factor is not periodic at s = {s}: residual {residual:.3e} > {tolerance:.3e}"
    )]
    Factorization {
        s: f64,
        residual: f64,
        tolerance: f64,
    },

    #[error("grid too coarse: {0}")]
    Resolution(String),

    #[error("geodesic homotopy unavailable: {0}")]
    HomotopyUnavailable(String),

    #[error("periodic orbit detection failed at s = {s}: {reason}")]
    OrbitDetection { s: f64, reason: String },

    #[error("spherical area oracle unavailable: {0}")]
    OracleUnavailable(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

fn fmt_s(s: Option<f64>) -> String {
    match s {
        Some(s) => format!(" at s = {s}"),
        None => String::new(),
    }
}

impl FloquetError {
    /// Stable machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            FloquetError::Context { .. } => "ContextError",
            FloquetError::InvalidGroupElement { .. } => "InvalidGroupElement",
            FloquetError::Drift { .. } => "DriftError",
            FloquetError::Boundary { .. } => "BoundaryError",
            FloquetError::UniformReducibilityViolated { .. } => "UniformReducibilityViolated",
            FloquetError::BranchAmbiguity { .. } => "BranchAmbiguity",
            FloquetError::BranchJump { .. } => "BranchJump",
            FloquetError::Factorization { .. } => "FactorizationError",
            FloquetError::Resolution(_) => "ResolutionError",
            FloquetError::HomotopyUnavailable(_) => "HomotopyUnavailable",
            FloquetError::OrbitDetection { .. } => "OrbitDetectionError",
            FloquetError::OracleUnavailable(_) => "OracleUnavailable",
            FloquetError::InvalidInput(_) => "InvalidInput",
        }
    }

    /// Parameter value of the family row that failed, when known.
    pub fn s(&self) -> Option<f64> {
        match self {
            FloquetError::Drift { s, .. } => *s,
            FloquetError::UniformReducibilityViolated { s }
            | FloquetError::BranchAmbiguity { s, .. }
            | FloquetError::BranchJump { s, .. }
            | FloquetError::Factorization { s, .. }
            | FloquetError::OrbitDetection { s, .. } => Some(*s),
            _ => None,
        }
    }
}
