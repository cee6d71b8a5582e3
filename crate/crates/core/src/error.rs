use std::path::PathBuf;

use rfdrone_nn::NnError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid BUI {code:?}: {reason}")]
    InvalidBui { code: String, reason: &'static str },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },
    #[error("band lengths differ: low {low}, high {high}")]
    LengthMismatch { low: usize, high: usize },
    #[error("sample rates differ: {0} Hz vs {1} Hz")]
    RateMismatch(f64, f64),
    #[error("segment contains non-finite samples")]
    NonFinite,
    #[error("no dataset entries found under {0}")]
    NoEntries(PathBuf),
    #[error("duplicate path in manifest: {0}")]
    DuplicatePath(PathBuf),
    #[error("manifest has no On-and-connected segments for {0}")]
    MissingSourceClass(&'static str),
    #[error("only On-and-connected single-drone segments of different types can be mixed: {0} + {1}")]
    UnsupportedMix(String, String),
    #[error("invalid length: {0}")]
    InvalidLength(String),
    #[error("FFT size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("signal of {len} samples is shorter than the required {needed}")]
    SignalTooShort { len: usize, needed: usize },
    #[error("expected {expected} frames, configuration yields {actual}")]
    FrameCountMismatch { expected: usize, actual: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error("class {class} has {count} samples, stratified splitting needs at least 3")]
    ClassTooSmall { class: usize, count: usize },
    #[error("training set is empty or smaller than one batch")]
    EmptyTrainSet,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("loss diverged at iteration {0}")]
    DivergedLoss(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
