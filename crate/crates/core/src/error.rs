use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("covariance matrix is numerically singular; jitter ladder tried: {ladder:?}")]
    Singular { ladder: Vec<f64> },

    #[error("training failed: all {restarts} restarts failed ({diagnostics:?})")]
    TrainingFailed { restarts: usize, diagnostics: Vec<String> },

    #[error("metric undefined: {0}")]
    MetricUndefined(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("source query failed: {0}")]
    Query(String),

    #[error("model file error: {0}")]
    ModelFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Contract(msg.into()))
}
