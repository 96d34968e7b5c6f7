use lyrnet_core::corpus::CorpusError;
use lyrnet_core::eval::EvalError;
use lyrnet_core::fetch::FetchError;
use lyrnet_core::train::CheckpointError;
use lyrnet_core::train::TrainError;

/// Exit codes: 2 usage, 3 data, 4 divergence, 5 failed gradient check.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Divergence(String),
    GradCheck(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Divergence(_) => 4,
            CliError::GradCheck(_) => 5,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m)
            | CliError::Data(m)
            | CliError::Divergence(m)
            | CliError::GradCheck(m) => m,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<FetchError> for CliError {
    fn from(e: FetchError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> CliError {
        match e {
            TrainError::Divergence { .. } | TrainError::NonFiniteGradient { .. } => {
                CliError::Divergence(e.to_string())
            }
            TrainError::BadConfig(_) | TrainError::AllZeroLambdas => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<lyrnet_core::model::ModelError> for CliError {
    fn from(e: lyrnet_core::model::ModelError) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> CliError {
        CliError::Data(e.to_string())
    }
}
