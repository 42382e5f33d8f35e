use omltune::dataspace::DataError;
use omltune::experiments::ExperimentError;
use omltune::tuner::TunerError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, spec or dataset id.
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Runtime(String),
    #[error("interrupted; artifacts were flushed")]
    Interrupted,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Runtime(_) => 1,
            CliError::Interrupted => 130,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Io { .. } => CliError::Runtime(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Invalid(fields) => {
                let mut msg = String::from("invalid experiment:");
                for f in &fields {
                    msg.push_str(&format!("\n  {f}"));
                }
                CliError::Invalid(msg)
            }
            ExperimentError::Data(d) => d.into(),
            ExperimentError::Tuner(TunerError::AllInitialFailed(_)) => CliError::Runtime(e.to_string()),
            ExperimentError::Tuner(_)
            | ExperimentError::WrongKind { .. }
            | ExperimentError::VersionMismatch { .. }
            | ExperimentError::Parse { .. }
            | ExperimentError::NotFound(_) => CliError::Invalid(e.to_string()),
            ExperimentError::Io { .. } | ExperimentError::Duplicate(_) | ExperimentError::Running(_) => {
                CliError::Runtime(e.to_string())
            }
        }
    }
}
