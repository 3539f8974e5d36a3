use std::path::PathBuf;

use cpgeo_core::nn::TrainError;
use cpgeo_core::PatchId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] cpgeo_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// A data row that failed to parse or validate. `row` is 1-based and
    /// excludes the header.
    #[error("{}, row {row}: {msg}", path.display())]
    Parse { path: PathBuf, row: usize, msg: String },

    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("geometry check failed for patch {}", list(.patches))]
    GeometryRejected { patches: Vec<PatchId> },

    #[error(transparent)]
    Train(#[from] Box<TrainError>),
}

fn list(p: &[PatchId]) -> String {
    p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        Error::Format { path: path.into(), msg: msg.to_string() }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, row: usize, msg: impl ToString) -> Self {
        Error::Parse { path: path.into(), row, msg: msg.to_string() }
    }
}

impl From<TrainError> for Error {
    fn from(e: TrainError) -> Self {
        Error::Train(Box::new(e))
    }
}
