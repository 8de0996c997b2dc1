use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("expected 2 channels, found {found}")]
    ChannelCount { found: u16 },
    #[error("unsupported WAV encoding: {bits}-bit {format}")]
    UnsupportedEncoding { bits: u16, format: &'static str },
    #[error("sample rate mismatch: expected {expected} Hz, found {found} Hz")]
    SampleRateMismatch { expected: u32, found: u32 },
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("signal of {len} samples is shorter than one frame ({frame_len})")]
    SignalTooShort { len: usize, frame_len: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("direction-dependent estimator {0} requires a DOA (--doa)")]
    MissingDoa(&'static str),
    #[error("source signal has zero power")]
    ZeroPowerSource,
    #[error("coherence matrix is not positive semidefinite (gamma = {0})")]
    NotPositiveSemidefinite(f64),
    #[error("grid is empty")]
    EmptyGrid,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
