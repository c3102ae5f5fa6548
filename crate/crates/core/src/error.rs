use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("empty mask at h={spacing}: {reason}")]
    EmptyMask { spacing: f64, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field has a negative value {value} at node {node}")]
    NegativeValue { node: usize, value: f64 },

    #[error("field vanishes identically")]
    ZeroField,

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("line search stalled at iteration {iteration} (step {step:e})")]
    LineSearch { iteration: usize, step: f64 },

    #[error("test field has mass {mass:e} on {nodes} nodes excluded by the positivity floor")]
    ExcludedMass { nodes: usize, mass: f64 },

    #[error("vanishing denominator in {0}")]
    VanishingDenominator(&'static str),

    #[error("degenerate pair: |z|^2 + |v|^2 = 0 is not allowed for 1 < p < 2")]
    DegeneratePair,

    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// `line` is 1-based; 0 means the problem is not tied to one line.
    #[error("config{}: {message}", if *line > 0 { format!(" line {line}") } else { String::new() })]
    Config { line: usize, message: String },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: message.into(),
        }
    }

    /// Solver-side failures as opposed to bad input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. } | Error::LineSearch { .. }
        )
    }

    /// Short machine-readable tag used in error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidExponent(_) => "invalid_exponent",
            Error::InvalidDomain(_) => "invalid_domain",
            Error::EmptyMask { .. } => "empty_mask",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::NegativeValue { .. } => "negative_value",
            Error::ZeroField => "zero_field",
            Error::NotConverged { .. } => "not_converged",
            Error::LineSearch { .. } => "line_search",
            Error::ExcludedMass { .. } => "excluded_mass",
            Error::VanishingDenominator(_) => "vanishing_denominator",
            Error::DegeneratePair => "degenerate_pair",
            Error::NotApplicable(_) => "not_applicable",
            Error::Config { .. } => "config",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
