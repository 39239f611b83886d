use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("position ({x}, {y}) is outside the unit arena")]
    OutOfArena { x: f64, y: f64 },

    #[error("cells belong to different layers ({0} vs {1})")]
    LayerMismatch(usize, usize),

    #[error("activation vector does not match the bank's stack: {0}")]
    StackMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown agent mode `{0}`")]
    UnknownMode(String),

    #[error("snapshot format: {0}")]
    SnapshotFormat(String),

    #[error("curve length mismatch ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
