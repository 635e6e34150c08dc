//! Shared inputs for the benchmarks.

use compass_core::simulate::{
    render, NoiseFieldSpec, NoiseKind, SceneSpec, SignalSpec, SourceSpec,
};
use compass_core::wav::blocks;
use compass_core::{AngleCandidate, CandidateBuffer, FrameBlock};

/// Blocks of a noisy speech scene on the default array.
pub fn speech_blocks(duration_s: f64) -> Vec<FrameBlock> {
    let scene = SceneSpec {
        duration_s,
        seed: 11,
        geometry: Default::default(),
        sources: vec![SourceSpec {
            azimuth_deg: 130.0,
            elevation_deg: 0.0,
            signal: SignalSpec::SpeechLike,
            level_dbfs: -26.0,
            active_intervals: vec![(0.0, duration_s)],
        }],
        noise: Some(NoiseFieldSpec::new(NoiseKind::Babble, Some(12.0))),
    };
    let rendered = render(&scene).expect("bench scene renders");
    blocks(&rendered.channels, 512).collect()
}

/// A full buffer of candidates spread around `center_deg`.
pub fn candidate_buffer(capacity: usize, center_deg: f64) -> CandidateBuffer {
    let mut buf = CandidateBuffer::new(capacity);
    for k in 0..capacity {
        // deterministic scatter of about ±20°
        let offset = ((k * 37) % 41) as f64 - 20.0;
        buf.push(AngleCandidate {
            azimuth_deg: (center_deg + offset).rem_euclid(360.0),
            pair: (k % 4, (k + 1) % 4),
            block_index: k as u64 / 12,
        });
    }
    buf
}
