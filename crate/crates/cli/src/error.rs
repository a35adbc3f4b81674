use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<latentgp::Error> for CliError {
    fn from(e: latentgp::Error) -> Self {
        use latentgp::Error as E;
        match e {
            E::Contract(_) => CliError::Usage(e.to_string()),
            E::Data(_) | E::Query(_) | E::ModelFile(_) => CliError::Data(e.to_string()),
            E::Singular { .. } | E::TrainingFailed { .. } | E::MetricUndefined(_) => CliError::Numerical(e.to_string()),
        }
    }
}
