use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the localization engine, simulator, and evaluation harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("frame length mismatch: {0} vs {1} samples")]
    LengthMismatch(usize, usize),

    #[error("malformed block: {0}")]
    MalformedBlock(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("audio source {path}: {reason}")]
    AudioSource { path: PathBuf, reason: String },

    #[error("diarization error rate is undefined: reference contains no speech")]
    EmptyReference,

    #[error("overlapping segments in {0} at {1:.3} s")]
    OverlappingSegments(&'static str, f64),

    #[error("invalid command: {0}")]
    InvalidCommand(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
