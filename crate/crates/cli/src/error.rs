use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: gridgsp::Error },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error(transparent)]
    Core(#[from] gridgsp::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn in_file(path: &Path, source: gridgsp::Error) -> Self {
        CliError::File {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit code: 3 parse, 4 config, 5 numerical, 6 infeasible
    /// topology, 1 anything else. Usage errors exit with 2 via clap.
    pub fn exit_code(&self) -> u8 {
        use gridgsp::Error as E;
        let core = match self {
            CliError::File { source, .. } | CliError::Core(source) => source,
            CliError::Io { .. } => return 1,
        };
        match core {
            E::Parse { .. } | E::Structure(_) | E::Validation(_) | E::DegenerateWeight { .. } | E::Json(_) | E::Csv(_) => 3,
            E::Config(_) | E::DimensionMismatch { .. } | E::InsufficientHistory { .. } | E::MissingCoordinates(_) => 4,
            E::Numerical { .. } | E::Undefined(_) => 5,
            E::InfeasibleTopology(_) => 6,
            E::Io(_) => 1,
        }
    }
}
