use thiserror::Error;

use crate::nn::weights::WeightError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("empty frame sequence")]
    EmptyFrames,

    #[error("invalid audio: {0}")]
    InvalidAudio(String),

    #[error("unsupported wav format in {path}: {reason}")]
    UnsupportedWav { path: String, reason: String },

    #[error("length mismatch: {left} vs {right} samples")]
    LengthMismatch { left: usize, right: usize },

    #[error("layer `{layer}`: {reason}")]
    Shape { layer: String, reason: String },

    #[error("non-finite value after layer `{0}`")]
    NonFinite(String),

    #[error(transparent)]
    Weights(#[from] WeightError),

    #[error("position outside room: {0}")]
    OutsideRoom(String),

    #[error("degenerate signal power: {0}")]
    DegeneratePower(String),

    #[error("no reference energy in the selected segment")]
    NoReferenceEnergy,

    #[error("segment too short: {0}")]
    SegmentTooShort(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Wav {
        path: String,
        #[source]
        source: hound::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
