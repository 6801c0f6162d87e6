use std::path::{Path, PathBuf};

/// Errors of the command-line layer.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] idsm_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Format { path: PathBuf, line: usize, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        Self::Format {
            path: path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    /// Process exit code: 2 configuration, 3 solver, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        use idsm_core::Error as E;
        match self {
            Self::Config(_) => 2,
            Self::Core(
                E::Config(_)
                | E::UnknownScenario(_)
                | E::Expression { .. }
                | E::Overlap { .. }
                | E::Clearance { .. }
                | E::MeshTooSmall(_)
                | E::InvalidGrid(_),
            ) => 2,
            Self::Core(_) => 3,
            Self::Io { .. } | Self::Format { .. } => 4,
        }
    }
}
