//! Measurement protocols: azimuth and elevation sweeps, convergence time,
//! and diarization error rate.

pub mod convergence;
pub mod der;
pub mod diarization;
pub mod hungarian;
pub mod report;
pub mod sweep;

pub use convergence::{measure_convergence, ConvergenceConfig, ConvergenceReport};
pub use der::{compute_der, DerReport};
pub use diarization::{
    compare_mic_configs, evaluate_der, CompareConfig, CompareReport, CompareRow, DerEvalConfig,
    DerEvalReport,
};
pub use sweep::{
    sweep_azimuth, sweep_elevation, ElevationReport, SweepConfig, SweepReport, SweepRow,
};

use crate::angle::{reflect_about, wrapped_distance};
use crate::diarize::SpeakerSegment;
use crate::error::Result;
use crate::fusion::AngleEstimate;
use crate::geometry::ArrayGeometry;
use crate::pipeline::{Engine, EventKind, SessionConfig};
use crate::wav::blocks;

/// Error of an estimate against the truth. For arrays that cannot tell the
/// two sides of their line apart, the mirror image of the estimate counts
/// as correct too.
pub fn localization_error(geometry: &ArrayGeometry, estimate: f64, truth: f64) -> f64 {
    let direct = wrapped_distance(estimate, truth);
    match geometry.line_axis_deg() {
        Some(axis) if !geometry.supports_full_circle() => {
            direct.min(wrapped_distance(reflect_about(estimate, axis), truth))
        }
        _ => direct,
    }
}

/// Error charged when no estimate exists at all.
pub const MISSING_ESTIMATE_ERROR: f64 = 180.0;

/// Outcome of running an engine over in-memory audio.
#[derive(Debug, Clone)]
pub struct SessionRun {
    pub final_estimate: Option<AngleEstimate>,
    pub segments: Vec<SpeakerSegment>,
}

/// Runs a fresh engine over `channels`.
pub fn run_session(cfg: &SessionConfig, channels: &[Vec<f64>]) -> Result<SessionRun> {
    let mut engine = Engine::new(cfg.clone())?;
    let mut segments = Vec::new();
    for block in blocks(channels, cfg.frame_len) {
        let out = engine.process_block(&block)?;
        collect_segments(&out.events, &mut segments);
    }
    let tail = engine.finish();
    collect_segments(&tail, &mut segments);
    Ok(SessionRun {
        final_estimate: engine.running_estimate(),
        segments,
    })
}

fn collect_segments(events: &[crate::pipeline::EngineEvent], out: &mut Vec<SpeakerSegment>) {
    for e in events {
        if let EventKind::SegmentClose { segment, .. } = &e.kind {
            out.push(segment.clone());
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folded_error_for_line_arrays() {
        let phone = ArrayGeometry::phone3();
        // the phone's line runs along y, so 30° and 150° are indistinguishable
        assert!(localization_error(&phone, 150.0, 30.0) < 1e-9);
        let rect = ArrayGeometry::rect4();
        assert!((localization_error(&rect, 150.0, 30.0) - 120.0).abs() < 1e-9);
    }
}
