//! How many accepted direction candidates the running estimate needs after
//! a sound starts before it settles on the source.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::localization_error;
use crate::error::{Error, Result};
use crate::fusion::Fusion;
use crate::pipeline::{Engine, SessionConfig};
use crate::simulate::{
    mix_seed, render, NoiseFieldSpec, NoiseKind, SceneSpec, SignalSpec, SourceSpec,
};
use crate::wav::blocks;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub session: SessionConfig,
    pub signal: SignalSpec,
    pub tolerance_deg: f64,
    pub seeds: usize,
    pub seed: u64,
    /// Lead-in with only the room noise floor.
    pub silence_s: f64,
    pub sound_s: f64,
    /// Source level over the room floor; `None` = digitally silent room.
    pub snr_db: Option<f64>,
    pub level_dbfs: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            session: SessionConfig::default(),
            signal: SignalSpec::WhiteNoise,
            tolerance_deg: 15.0,
            seeds: 10,
            seed: 0,
            silence_s: 10.0,
            sound_s: 5.0,
            // 65 dB SPL source over a 45 dB SPL room
            snr_db: Some(20.0),
            level_dbfs: -26.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRun {
    pub seed: u64,
    pub azimuth_deg: f64,
    /// Candidates after onset until the estimate entered the tolerance for
    /// good; `None` if it never did.
    pub candidates: Option<usize>,
    /// Candidates accepted before the onset.
    pub pre_onset_candidates: usize,
    pub final_error_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub signal: String,
    pub runs: Vec<ConvergenceRun>,
    pub mean: Option<f64>,
    pub min: Option<usize>,
    pub max: Option<usize>,
    pub never_converged: usize,
}

impl ConvergenceReport {
    fn from_runs(signal: String, runs: Vec<ConvergenceRun>) -> Self {
        let ok: Vec<usize> = runs.iter().filter_map(|r| r.candidates).collect();
        Self {
            signal,
            mean: (!ok.is_empty()).then(|| ok.iter().sum::<usize>() as f64 / ok.len() as f64),
            min: ok.iter().copied().min(),
            max: ok.iter().copied().max(),
            never_converged: runs.len() - ok.len(),
            runs,
        }
    }
}

/// First 1-based index from which every error stays within tolerance.
pub fn settle_index(errors: &[f64], tolerance_deg: f64) -> Option<usize> {
    let last_bad = errors.iter().rposition(|e| *e > tolerance_deg);
    match last_bad {
        None if errors.is_empty() => None,
        None => Some(1),
        Some(i) if i + 1 == errors.len() => None,
        Some(i) => Some(i + 2),
    }
}

pub fn measure_convergence(cfg: &ConvergenceConfig) -> Result<ConvergenceReport> {
    if cfg.seeds == 0 || !(cfg.sound_s > 0.0) || !(cfg.silence_s >= 0.0) {
        return Err(Error::InvalidConfig(
            "convergence needs seeds and a positive sound duration".into(),
        ));
    }
    cfg.session.validate()?;
    let runs = (0..cfg.seeds as u64)
        .into_par_iter()
        .map(|k| run_one(cfg, mix_seed(cfg.seed, 0xC0, k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport::from_runs(
        super::sweep::signal_name(&cfg.signal),
        runs,
    ))
}

fn run_one(cfg: &ConvergenceConfig, seed: u64) -> Result<ConvergenceRun> {
    let azimuth_deg = ChaCha8Rng::seed_from_u64(seed)
        .random_range(0.0..360.0f64)
        .round();
    let onset = cfg.silence_s;
    let sources = vec![SourceSpec {
        azimuth_deg,
        elevation_deg: 0.0,
        signal: cfg.signal.clone(),
        level_dbfs: cfg.level_dbfs,
        active_intervals: vec![(onset, onset + cfg.sound_s)],
    }];
    let scene = SceneSpec {
        duration_s: onset + cfg.sound_s,
        seed,
        geometry: cfg.session.geometry.clone(),
        sources,
        noise: cfg
            .snr_db
            .map(|snr| NoiseFieldSpec::new(NoiseKind::White, Some(snr))),
    };
    let rendered = render(&scene)?;
    let mut engine = Engine::new(cfg.session.clone())?;
    let geometry = engine.geometry().clone();
    // a private fusion so the estimate can be read after every candidate
    let mut fusion = Fusion::new(
        engine.estimator_mode(),
        cfg.session.buffer_capacity,
        cfg.session.bandwidth_deg,
        cfg.session.bin_width_deg,
    );
    let onset_sample = (onset * geometry.sample_rate_hz() as f64).round() as u64;
    let mut errors = Vec::new();
    let mut pre = 0;
    for block in blocks(&rendered.channels, cfg.session.frame_len) {
        let after_onset = block.start_sample() + cfg.session.frame_len as u64 > onset_sample;
        let out = engine.process_block(&block)?;
        for c in out.accepted {
            fusion.push(c);
            if after_onset {
                let e = fusion.estimate().map_or(180.0, |e| {
                    localization_error(&geometry, e.azimuth_deg, azimuth_deg)
                });
                errors.push(e);
            } else {
                pre += 1;
            }
        }
    }
    Ok(ConvergenceRun {
        seed,
        azimuth_deg,
        candidates: settle_index(&errors, cfg.tolerance_deg),
        pre_onset_candidates: pre,
        final_error_deg: errors.last().copied(),
    })
}
