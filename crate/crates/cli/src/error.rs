use std::fmt::Display;
use std::path::{Path, PathBuf};

use metatutor_core::deepq::DeepQError;
use metatutor_core::forest::ForestError;
use metatutor_core::harness::HarnessError;
use metatutor_core::sim::SimError;
use metatutor_core::stats::StatsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } => 2,
            CliError::Invalid(_) => 1,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// A file that was read fine but whose contents were rejected.
    pub fn in_file(path: &Path, e: impl Display) -> Self {
        CliError::Invalid(format!("{}: {e}", path.display()))
    }
}

// The command layer reads and writes files itself, so every library error is
// a validation failure.
macro_rules! invalid_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Invalid(e.to_string())
            }
        }
    )*};
}

invalid_from!(HarnessError, DeepQError, ForestError, SimError, StatsError);
