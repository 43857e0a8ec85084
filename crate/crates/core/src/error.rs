use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    /// A parameter is outside the range where the model is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The log argument of the delay inversion is not positive.
    #[error("ratio {ratio} is outside the inversion domain at h={h} (log argument {log_argument})")]
    OutOfDomain { h: f64, ratio: f64, log_argument: f64 },

    #[error("degenerate loop: {0}")]
    DegenerateLoop(String),

    #[error("state diverged at step {step}")]
    Divergence { step: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("unsupported correction: {0}")]
    UnsupportedCorrection(String),

    #[error("rank-deficient fit: {0}")]
    RankDeficient(String),

    #[error("no interior minimum: quadratic coefficient c={0} is not positive")]
    NoInteriorMinimum(f64),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Non-fatal conditions attached to otherwise valid results.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// The delay is longer than one sampling period; the one-step delayed
    /// model assumes at most one period of delay.
    DelayExceedsPeriod { h: f64, tau: f64 },
    /// The recovered delay is zero or negative (ratio at or beyond the
    /// admissibility bound).
    NonpositiveDelay { ratio: f64, tau: f64 },
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Warning::DelayExceedsPeriod { h, tau } => {
                write!(f, "delay_exceeds_period: tau={tau} > h={h}")
            }
            Warning::NonpositiveDelay { ratio, tau } => {
                write!(f, "nonpositive_delay: ratio={ratio} gives tau={tau}")
            }
        }
    }
}
