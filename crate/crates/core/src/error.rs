use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("subdomain {subdomain} contains no collocation points")]
    EmptySubdomain { subdomain: usize },

    #[error("non-finite matrix entry at collocation point {point}, subdomain {subdomain}")]
    NonFinite { point: usize, subdomain: usize },

    #[error("non-finite input to {0}")]
    NonFiniteInput(&'static str),

    #[error("subdomain {subdomain} has an empty index set")]
    EmptyIndexSet { subdomain: usize },

    #[error("matrix of order {size} exceeds the dense limit {limit}")]
    DenseLimit { size: usize, limit: usize },

    #[error("krylov basis of {needed} entries exceeds the memory cap {cap}; set a restart length")]
    KrylovMemory { needed: usize, cap: usize },

    #[error("{phase} phase failed: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn in_phase(self, phase: &'static str) -> Error {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
