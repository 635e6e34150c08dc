//! Azimuth and elevation accuracy sweeps.
//!
//! Each trial uses one realization of the source signal and of the diffuse
//! noise field, played from every test angle in turn, the way a loudspeaker
//! recording is replayed while a device is rotated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{localization_error, mean, run_session, MISSING_ESTIMATE_ERROR};
use crate::error::{Error, Result};
use crate::pipeline::SessionConfig;
use crate::simulate::{
    mix_seed, render_noise_field, render_plane_wave, signals::SIGNAL_RMS, source_signal,
    NoiseFieldSpec, NoiseKind, SignalSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub session: SessionConfig,
    /// Source signals; each becomes its own set of rows.
    pub signals: Vec<SignalSpec>,
    /// SNR conditions (`None` = clean).
    pub snr_levels: Vec<Option<f64>>,
    pub noise_kind: NoiseKind,
    pub angles: Vec<f64>,
    pub elevation_deg: f64,
    pub window_s: f64,
    pub trials: usize,
    pub seed: u64,
    pub level_dbfs: f64,
}

impl SweepConfig {
    /// `session` with fusion decoupled from the speech gate: stationary test
    /// sounds are localized continuously.
    pub fn localization_session(session: SessionConfig) -> SessionConfig {
        SessionConfig {
            gate_fusion: false,
            ..session
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            session: Self::localization_session(SessionConfig::default()),
            signals: vec![SignalSpec::WhiteNoise],
            snr_levels: vec![None],
            noise_kind: NoiseKind::White,
            angles: (0..36).map(|k| k as f64 * 10.0).collect(),
            elevation_deg: 0.0,
            window_s: 15.0,
            trials: 3,
            seed: 0,
            level_dbfs: -26.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub signal: String,
    pub snr_db: Option<f64>,
    /// Mean error per angle over the trials.
    pub per_angle: Vec<f64>,
    /// Mean error per trial over the angles.
    pub per_trial: Vec<f64>,
    pub mean_error: f64,
    /// Runs that ended without any estimate.
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub angles: Vec<f64>,
    pub trials: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn row(&self, signal: &str, snr_db: Option<f64>) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.signal == signal && r.snr_db == snr_db)
    }

    /// Mean over the given angles of a row's per-angle errors.
    pub fn mean_at(&self, row: &SweepRow, angles: &[f64]) -> f64 {
        let v: Vec<f64> = angles
            .iter()
            .filter_map(|a| self.angles.iter().position(|x| (x - a).abs() < 1e-9))
            .map(|i| row.per_angle[i])
            .collect();
        mean(&v)
    }
}

pub fn signal_name(s: &SignalSpec) -> String {
    match s {
        SignalSpec::WhiteNoise => "white-noise".into(),
        SignalSpec::SpeechLike => "speech-like".into(),
        SignalSpec::Wav { path } => path.display().to_string(),
    }
}

/// Runs every (signal, SNR) condition over all angles and trials.
pub fn sweep_azimuth(cfg: &SweepConfig) -> Result<SweepReport> {
    if cfg.trials == 0
        || cfg.angles.is_empty()
        || cfg.signals.is_empty()
        || cfg.snr_levels.is_empty()
    {
        return Err(Error::InvalidConfig(
            "sweep needs angles, signals, SNR levels and trials".into(),
        ));
    }
    if !(cfg.window_s > 0.0) {
        return Err(Error::InvalidConfig("sweep window must be positive".into()));
    }
    cfg.session.validate()?;
    let geometry = cfg.session.array()?;
    let fs = geometry.sample_rate_hz();
    let n = (cfg.window_s * fs as f64).round() as usize;
    let gain = 10f64.powf(cfg.level_dbfs / 20.0) / SIGNAL_RMS;
    let noisy = cfg.snr_levels.iter().any(Option::is_some);

    let noise_spec = NoiseFieldSpec::new(cfg.noise_kind, None);
    let noise: Vec<Option<Vec<Vec<f64>>>> = (0..cfg.trials)
        .map(|t| {
            noisy.then(|| {
                render_noise_field(
                    &geometry,
                    &noise_spec,
                    n,
                    mix_seed(cfg.seed, 0x5EED, t as u64),
                )
            })
        })
        .collect();
    let noise_power: Vec<f64> = noise
        .iter()
        .map(|img| {
            img.as_ref().map_or(0.0, |img| {
                img.iter().flatten().map(|v| v * v).sum::<f64>() / (img.len() * n) as f64
            })
        })
        .collect();
    let dry: Vec<Vec<Vec<f64>>> = cfg
        .signals
        .iter()
        .enumerate()
        .map(|(si, s)| {
            (0..cfg.trials)
                .map(|t| source_signal(s, n, mix_seed(cfg.seed, si as u64, t as u64), fs))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let points: Vec<(usize, usize)> = (0..cfg.angles.len())
        .flat_map(|a| (0..cfg.trials).map(move |t| (a, t)))
        .collect();
    // errors[point][signal][snr]
    let errors: Vec<Vec<Vec<Option<f64>>>> = points
        .par_iter()
        .map(|&(ai, t)| {
            let az = cfg.angles[ai];
            cfg.signals
                .iter()
                .enumerate()
                .map(|(si, _)| {
                    let image = render_plane_wave(
                        &geometry,
                        &dry[si][t],
                        az,
                        cfg.elevation_deg,
                        0,
                        gain,
                        n,
                    );
                    let sp = image.iter().flatten().map(|v| v * v).sum::<f64>()
                        / (image.len() * n) as f64;
                    cfg.snr_levels
                        .iter()
                        .map(|snr| {
                            let channels = match (snr, &noise[t]) {
                                (Some(snr), Some(img)) => {
                                    let g = (sp / (noise_power[t] * 10f64.powf(snr / 10.0))).sqrt();
                                    image
                                        .iter()
                                        .zip(img)
                                        .map(|(s, w)| {
                                            s.iter().zip(w).map(|(a, b)| a + g * b).collect()
                                        })
                                        .collect()
                                }
                                _ => image.clone(),
                            };
                            let run = run_session(&cfg.session, &channels)?;
                            Ok(run
                                .final_estimate
                                .map(|e| localization_error(&geometry, e.azimuth_deg, az)))
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (si, s) in cfg.signals.iter().enumerate() {
        for (ki, &snr) in cfg.snr_levels.iter().enumerate() {
            let mut per_angle = vec![0.0; cfg.angles.len()];
            let mut per_trial = vec![0.0; cfg.trials];
            let mut missing = 0;
            for (p, &(ai, t)) in points.iter().enumerate() {
                let e = errors[p][si][ki].unwrap_or_else(|| {
                    missing += 1;
                    MISSING_ESTIMATE_ERROR
                });
                per_angle[ai] += e / cfg.trials as f64;
                per_trial[t] += e / cfg.angles.len() as f64;
            }
            rows.push(SweepRow {
                signal: signal_name(s),
                snr_db: snr,
                mean_error: mean(&per_angle),
                per_angle,
                per_trial,
                missing,
            });
        }
    }
    Ok(SweepReport {
        angles: cfg.angles.clone(),
        trials: cfg.trials,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElevationReport {
    pub azimuth_deg: f64,
    pub elevations: Vec<f64>,
    pub mean_error: Vec<f64>,
}

impl ElevationReport {
    pub fn error_at(&self, elevation: f64) -> Option<f64> {
        self.elevations
            .iter()
            .position(|e| (e - elevation).abs() < 1e-9)
            .map(|i| self.mean_error[i])
    }
}

/// Azimuth error of a fixed source as it is raised or lowered out of the
/// array plane. Uses the sweep's signals, SNR, window and trials; its angle
/// list is replaced by `azimuth_deg`.
pub fn sweep_elevation(
    base: &SweepConfig,
    elevations: &[f64],
    azimuth_deg: f64,
) -> Result<ElevationReport> {
    let mut mean_error = Vec::with_capacity(elevations.len());
    for &el in elevations {
        let cfg = SweepConfig {
            angles: vec![azimuth_deg],
            elevation_deg: el,
            signals: base.signals[..1].to_vec(),
            snr_levels: base.snr_levels[..1].to_vec(),
            ..base.clone()
        };
        mean_error.push(sweep_azimuth(&cfg)?.rows[0].mean_error);
    }
    Ok(ElevationReport {
        azimuth_deg,
        elevations: elevations.to_vec(),
        mean_error,
    })
}
