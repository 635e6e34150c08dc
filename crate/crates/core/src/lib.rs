//! Multi-microphone sound localization and direction-based speaker
//! diarization.
//!
//! Audio arrives in synchronized multichannel blocks. Each mic pair yields a
//! time difference of arrival via partially normalized GCC-PHAT; each delay
//! maps to two mirror-image azimuth candidates; a wrapped kernel density (or
//! histogram, for line arrays) over the latest candidates gives the source
//! direction. Per-block directions, an energy gate, and a running histogram
//! turn the stream into speaker-labeled segments that can be hidden by
//! direction.
//!
//! The crate also ships a free-field scene simulator and the evaluation
//! harness used to check accuracy, convergence, and diarization error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angle;
pub mod diarize;
pub mod error;
pub mod evaluate;
pub mod fusion;
pub mod geometry;
pub mod pipeline;
pub mod simulate;
pub mod spectral;
pub mod wav;

pub use diarize::{
    apply_sector_filter, utterance_azimuth, Diarizer, DiarizerConfig, Sector, SectorFilter,
    SpeakerSegment, SpeechGate, SpeechGateConfig,
};
pub use error::{Error, Result};
pub use fusion::{AngleCandidate, AngleEstimate, CandidateBuffer, EstimatorMode, Fusion};
pub use geometry::{enumerate_pairs, local_to_global, ArrayGeometry, GeometryConfig, MicPair};
pub use pipeline::{Command, Engine, EngineEvent, EventKind, SessionConfig};
pub use simulate::{
    render, GroundTruth, NoiseFieldSpec, NoiseKind, SceneSpec, SignalSpec, SourceSpec,
};
pub use spectral::{
    delay_to_angle, estimate_delay, gcc_phat, DelayConfig, DelayEstimate, DelayEstimator,
    FrameBlock,
};
