use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidNetwork(Vec<crate::model::Violation>),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("time series: {0}")]
    TimeSeries(String),

    #[error("gap in hourly input: first missing timestamp is {0}")]
    MissingHour(chrono::NaiveDateTime),

    #[error("unknown profile '{0}'")]
    UnknownProfile(String),

    #[error("model build: {0}")]
    Build(String),

    #[error("solver configuration: {0}")]
    SolverConfig(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("clustering: {0}")]
    Cluster(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable tag, used by the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidNetwork(_) => "invalid_network",
            Error::InvalidScenario(_) => "invalid_scenario",
            Error::TimeSeries(_) => "time_series",
            Error::MissingHour(_) => "missing_hour",
            Error::UnknownProfile(_) => "unknown_profile",
            Error::Build(_) => "build",
            Error::SolverConfig(_) => "solver_config",
            Error::Solver(_) => "solver",
            Error::Cluster(_) => "cluster",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::MissingInput(_) => "missing_input",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
