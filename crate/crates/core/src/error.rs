use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid rotation: {0}")]
    InvalidRotation(String),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("need at least {required} cameras, found {found}")]
    TooFewCameras { required: usize, found: usize },
    #[error("behind camera")]
    BehindCamera,
    #[error("degenerate baseline")]
    DegenerateBaseline,
    #[error("no object")]
    NoObject,
    #[error("no converged circumference")]
    NoConvergedCircumference,
    #[error("malformed pnm: {0}")]
    MalformedPnm(String),
    #[error("unsupported maxval {0}")]
    UnsupportedMaxval(u32),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("invalid mask: {0}")]
    InvalidMask(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("empty manifest")]
    EmptyManifest,
    #[error("empty input")]
    EmptyInput,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
