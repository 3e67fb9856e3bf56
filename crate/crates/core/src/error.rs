use thiserror::Error;

use crate::surface::SurfaceKind;

pub type Result<T, E = LabError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("point {point:?} lies outside the tubular neighborhood of the {kind:?} embedding")]
    ProjectionDomain { kind: SurfaceKind, point: Vec<f64> },

    #[error("threshold error: S(f) is empty for tau = {tau} (max T observed = {max_t})")]
    Threshold { tau: f64, max_t: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("bubble core under-resolved: lambda = {lambda} leaves {nodes} node(s) in the core (need {required})")]
    Resolution {
        lambda: f64,
        nodes: usize,
        required: usize,
    },

    #[error("numerical blow-up at iteration {iteration}: non-finite iterate")]
    NumericalBlowup { iteration: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl LabError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        LabError::Config(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        LabError::Precondition(msg.into())
    }
}
