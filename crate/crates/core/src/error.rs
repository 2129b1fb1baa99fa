use thiserror::Error;

/// Errors raised by the auditing library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuditError {
    #[error("parameter {theta:?} lies outside the parameter set")]
    ParamOutOfSet { theta: Vec<f64> },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("finite stream ended after {consumed} outcomes with {successes} of {tau} successes")]
    StreamExhausted {
        consumed: usize,
        successes: usize,
        tau: usize,
    },

    #[error("instance is ill-posed: {0}")]
    IllPosed(String),

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("access error: {0}")]
    Access(String),

    #[error("past database exhausted after {scanned} records with {hits} of {tau} hits for (y={y}, a={a})")]
    InsufficientHistory {
        y: u8,
        a: u32,
        tau: usize,
        hits: usize,
        scanned: usize,
    },

    #[error("rejection sampler gave up after {attempts} attempts")]
    AcceptanceFailure { attempts: usize },

    #[error("moment vector {0:?} is outside the family's mean space")]
    DegenerateMoments(Vec<f64>),

    #[error("projection did not converge onto the feasible intersection")]
    InfeasibleIntersection,

    #[error("cell holds {have} samples, estimator needs {need}")]
    InsufficientSamples { have: usize, need: usize },

    #[error("no candidate estimate is close to a majority of the others")]
    NoMajorityCandidate,

    #[error("online draw budget of {0} individuals exhausted")]
    DrawBudgetExhausted(u64),

    #[error("serialization: {0}")]
    Serde(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for AuditError {
    fn from(e: std::io::Error) -> Self {
        AuditError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for AuditError {
    fn from(e: serde_json::Error) -> Self {
        AuditError::Serde(e.to_string())
    }
}

impl From<csv::Error> for AuditError {
    fn from(e: csv::Error) -> Self {
        AuditError::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, AuditError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(AuditError::Domain(msg.into()))
}
