use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}` = {value}: {reason}")]
    Parameter {
        field: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("argument s = {s} is within {distance:e} of the pole at {pole}")]
    Pole { s: f64, pole: f64, distance: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "{what} did not converge (partial value {partial}, error estimate {error_estimate:e})"
    )]
    Convergence {
        what: &'static str,
        partial: f64,
        error_estimate: f64,
    },

    #[error("root is not bracketed: f({lo}) = {f_lo}, f({hi}) = {f_hi}")]
    Bracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("theta = {theta} gives a negative mass at state {index}; theta exceeds the minimal survival rate")]
    InvalidTheta { theta: f64, index: usize },

    #[error("theta = {theta} is within {guard:e} of the singularity at theta* = {theta_star}")]
    NearSingularity {
        theta: f64,
        theta_star: f64,
        guard: f64,
    },

    #[error("statistics error: {0}")]
    Statistics(String),

    #[error("trajectory {trajectory} exceeded {max_events} events")]
    Runaway { trajectory: u64, max_events: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter { .. } | Error::InvalidTheta { .. } => 2,
            Error::Statistics(_) => 4,
            _ => 3,
        }
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parameter { .. } => "parameter",
            Error::Pole { .. } => "pole",
            Error::Domain(_) => "domain",
            Error::Convergence { .. } => "convergence",
            Error::Bracket { .. } => "bracket",
            Error::InvalidTheta { .. } => "invalid_theta",
            Error::NearSingularity { .. } => "near_singularity",
            Error::Statistics(_) => "statistics",
            Error::Runaway { .. } => "runaway",
        }
    }
}
