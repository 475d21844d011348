use std::path::{Path, PathBuf};

use marketgym_gym::EnvError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config line {line}, column {column}, at `{field}`: {message}")]
    Config {
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("config `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("discretization yields {0} states, more than the limit of 1000000")]
    TooManyStates(u128),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{} already holds a run; pass --overwrite to replace it", .0.display())]
    OutputExists(PathBuf),
    #[error("{}: line {line}: {message}", path.display())]
    Log { path: PathBuf, line: usize, message: String },
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_owned(),
            source,
        }
    }
}
