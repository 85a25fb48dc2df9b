use thiserror::Error;

use crate::rof::RofSolution;

/// Errors produced by the solvers, checkers and persistence layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("operation requires dim = {expected}, got dim = {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("contrast map is not increasing: g'({at}) = {derivative}")]
    NonMonotoneMap { at: f64, derivative: f64 },

    #[error("ROF solver did not converge in {iterations} iterations (gap = {gap:e})")]
    RofNoConvergence {
        iterations: usize,
        gap: f64,
        last: Box<RofSolution>,
    },

    #[error("{solver} did not converge after {iterations} iterations: {detail}")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        detail: String,
    },

    #[error("numerical underflow in {0}")]
    NumericalUnderflow(String),

    #[error("barrier violated: density value {value} <= c = {c}")]
    BarrierViolation { value: f64, c: f64 },

    #[error("problem too large for the LP oracle: N = {0} > 4096")]
    TooLarge(usize),

    #[error("density value {value} outside validity range ({lo}, {hi}) of {name}")]
    RangeViolation {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("bounds hypothesis violated: {0}")]
    BoundsViolated(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("unknown datum preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid parameter `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("format error: {0}")]
    FormatVersionMismatch(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Stable machine-readable tag, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::GridMismatch(_) => "grid_mismatch",
            Error::Dimension { .. } => "dimension",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidDensity(_) => "invalid_density",
            Error::NonMonotoneMap { .. } => "non_monotone_map",
            Error::RofNoConvergence { .. } | Error::NoConvergence { .. } => "no_convergence",
            Error::NumericalUnderflow(_) => "numerical_underflow",
            Error::BarrierViolation { .. } => "barrier_violation",
            Error::TooLarge(_) => "too_large",
            Error::RangeViolation { .. } => "range_violation",
            Error::BoundsViolated(_) => "bounds_violated",
            Error::Index(_) => "index",
            Error::UnknownPreset(_) => "unknown_preset",
            Error::Validation { .. } => "validation",
            Error::Parse(_) => "parse",
            Error::FormatVersionMismatch(_) => "format_version_mismatch",
            Error::Io(_) => "io",
            Error::Step { source, .. } => source.kind(),
        }
    }

    /// Whether this error (or the step error it wraps) is a solver failure.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::RofNoConvergence { .. }
            | Error::NoConvergence { .. }
            | Error::NumericalUnderflow(_)
            | Error::BarrierViolation { .. } => true,
            Error::Step { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}
