use std::path::PathBuf;

use thiserror::Error;

use crate::solver::SolverError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Solver(#[from] SolverError),

    /// Malformed or inconsistent input data, naming the offending field.
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("unknown building `{0}`")]
    UnknownBuilding(String),

    #[error("coalition must contain at least one building")]
    EmptyCoalition,

    #[error("coalition {coalition}: sizing problem is infeasible (check grid exchange cap against net load)")]
    InfeasibleCoalition { coalition: String },

    #[error("results belong to a different community model")]
    ModelMismatch,

    #[error("shapley needs 2^{players} coalition values; refusing above {limit} players without override")]
    TooManyPlayers { players: usize, limit: usize },

    #[error("no building reduces its operation cost; proportional capital shares are undefined")]
    DegenerateProportional,

    #[error("internal consistency failure: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), message: message.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures caused by user input rather than by solving.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. }
                | Error::Io { .. }
                | Error::Parse { .. }
                | Error::UnknownBuilding(_)
                | Error::EmptyCoalition
                | Error::TooManyPlayers { .. }
                | Error::DegenerateProportional
                | Error::ModelMismatch
        )
    }
}
