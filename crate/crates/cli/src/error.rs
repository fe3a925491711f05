use std::path::PathBuf;

use semsched_core::oracle::OracleError;
use semsched_core::sim::SimError;
use semsched_core::sweep::SweepError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("sensor {sensor}: {message}")]
    Numerical { sensor: usize, message: String },
    #[error("{0}")]
    GridTooLarge(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } => 3,
            CliError::GridTooLarge(_) => 4,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

// Sensors are numbered from 1 in everything the user sees.
impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Model { sensor, source } => CliError::Numerical {
                sensor: sensor + 1,
                message: source.to_string(),
            },
            SimError::ZeroDuration => CliError::Other(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        match e {
            SweepError::GridTooLarge { .. } => CliError::GridTooLarge(e.to_string()),
            SweepError::Sim(s) => s.into(),
            SweepError::EmptyGrid(_) | SweepError::InvalidWeights => CliError::Config(e.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

pub(crate) fn oracle_error(sensor: usize, e: OracleError) -> CliError {
    CliError::Numerical {
        sensor: sensor + 1,
        message: e.to_string(),
    }
}
