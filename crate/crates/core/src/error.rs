//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("data errors:\n{}", .0.join("\n"))]
    DataItems(Vec<String>),

    #[error("missing hospital-year key: hospital={hospital} year={year}")]
    MissingHospitalYear { hospital: String, year: i32 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code per the CLI contract: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::DataItems(_) | Error::MissingHospitalYear { .. } => 3,
            Error::Numeric(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
            Error::Io(_) | Error::Csv(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
