//! Diarization error rate over simulated multi-talker conversations, and the
//! 3-mic versus 4-mic comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::der::{compute_der, DerReport};
use super::{mean, run_session};
use crate::error::{Error, Result};
use crate::geometry::GeometryConfig;
use crate::pipeline::SessionConfig;
use crate::simulate::{
    make_conversation, mix_seed, render_parts, ConversationSpec, NoiseFieldSpec, NoiseKind,
};

/// Noise kinds cycled over the conversations.
const NOISE_KINDS: [NoiseKind; 2] = [NoiseKind::Babble, NoiseKind::Traffic];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub session: SessionConfig,
    pub conversation: ConversationSpec,
    pub snr_levels: Vec<Option<f64>>,
    pub n_conversations: usize,
    pub seed: u64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            session: SessionConfig::default(),
            conversation: ConversationSpec::default(),
            snr_levels: vec![None, Some(18.0), Some(12.0), Some(6.0)],
            n_conversations: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub snr_db: Option<f64>,
    /// Mean per-conversation DER.
    pub der_4mic: f64,
    pub der_3mic: f64,
    /// `(der_3mic - der_4mic) / der_3mic`.
    pub relative_improvement: f64,
    pub pooled_4mic: DerReport,
    pub pooled_3mic: DerReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub n_conversations: usize,
    pub rows: Vec<CompareRow>,
    pub mean_relative_improvement: f64,
}

/// DER of every (conversation, SNR, geometry) cell. The 3-mic array is
/// the 4-mic rectangle minus its fourth mic, fed the same rendered audio.
fn der_grid(
    conversation: &ConversationSpec,
    snr_levels: &[Option<f64>],
    n: usize,
    seed: u64,
    configs: &[(SessionConfig, Vec<usize>)],
) -> Result<Vec<Vec<Vec<DerReport>>>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let spec = ConversationSpec {
                seed: mix_seed(seed, 0xD1A, i),
                noise: Some(NoiseFieldSpec::new(
                    NOISE_KINDS[i as usize % NOISE_KINDS.len()],
                    Some(0.0),
                )),
                ..conversation.clone()
            };
            let scene = make_conversation(&spec)?;
            let parts = render_parts(&scene)?;
            let reference = parts.truth.reference_segments();
            snr_levels
                .iter()
                .map(|&snr| {
                    let mixed = parts.mix(snr);
                    configs
                        .iter()
                        .map(|(cfg, channels)| {
                            let chans: Vec<Vec<f64>> =
                                channels.iter().map(|&c| mixed[c].clone()).collect();
                            let run = run_session(cfg, &chans)?;
                            compute_der(&reference, &run.segments)
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

fn with_geometry(base: &SessionConfig, preset: &str) -> SessionConfig {
    SessionConfig {
        geometry: GeometryConfig {
            preset: Some(preset.into()),
            ..base.geometry.clone()
        },
        ..base.clone()
    }
}

pub fn compare_mic_configs(cfg: &CompareConfig) -> Result<CompareReport> {
    if cfg.n_conversations == 0 || cfg.snr_levels.is_empty() {
        return Err(Error::InvalidConfig(
            "comparison needs conversations and SNR levels".into(),
        ));
    }
    let four = with_geometry(&cfg.session, "rect4");
    let three = with_geometry(&cfg.session, "rect3");
    four.validate()?;
    three.validate()?;
    let conversation = ConversationSpec {
        geometry: four.geometry.clone(),
        ..cfg.conversation.clone()
    };
    let grid = der_grid(
        &conversation,
        &cfg.snr_levels,
        cfg.n_conversations,
        cfg.seed,
        &[(four, vec![0, 1, 2, 3]), (three, vec![0, 1, 2])],
    )?;
    let rows: Vec<CompareRow> = cfg
        .snr_levels
        .iter()
        .enumerate()
        .map(|(k, &snr)| {
            let r4: Vec<DerReport> = grid.iter().map(|c| c[k][0]).collect();
            let r3: Vec<DerReport> = grid.iter().map(|c| c[k][1]).collect();
            let der_4mic = mean(&r4.iter().map(|r| r.der).collect::<Vec<_>>());
            let der_3mic = mean(&r3.iter().map(|r| r.der).collect::<Vec<_>>());
            CompareRow {
                snr_db: snr,
                der_4mic,
                der_3mic,
                relative_improvement: if der_3mic > 0.0 {
                    (der_3mic - der_4mic) / der_3mic
                } else {
                    0.0
                },
                pooled_4mic: DerReport::pooled(&r4).unwrap_or_default(),
                pooled_3mic: DerReport::pooled(&r3).unwrap_or_default(),
            }
        })
        .collect();
    let mean_relative_improvement = mean(
        &rows
            .iter()
            .map(|r| r.relative_improvement)
            .collect::<Vec<_>>(),
    );
    Ok(CompareReport {
        n_conversations: cfg.n_conversations,
        rows,
        mean_relative_improvement,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DerEvalConfig {
    pub session: SessionConfig,
    pub conversation: ConversationSpec,
    /// 4 = full rectangle, 3 = rectangle minus its fourth mic.
    pub mics: usize,
    pub snr_db: Option<f64>,
    pub n_conversations: usize,
    pub seed: u64,
}

impl Default for DerEvalConfig {
    fn default() -> Self {
        Self {
            session: SessionConfig::default(),
            conversation: ConversationSpec::default(),
            mics: 4,
            snr_db: Some(12.0),
            n_conversations: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerEvalReport {
    pub mics: usize,
    pub snr_db: Option<f64>,
    pub per_conversation: Vec<DerReport>,
    pub mean_der: f64,
    pub pooled: DerReport,
}

/// DER of one array configuration at one SNR. Uses the same conversations
/// as [`compare_mic_configs`] for equal seeds.
pub fn evaluate_der(cfg: &DerEvalConfig) -> Result<DerEvalReport> {
    let (preset, channels) = match cfg.mics {
        4 => ("rect4", vec![0, 1, 2, 3]),
        3 => ("rect3", vec![0, 1, 2]),
        m => {
            return Err(Error::InvalidConfig(format!(
                "mics must be 3 or 4, got {m}"
            )))
        }
    };
    if cfg.n_conversations == 0 {
        return Err(Error::InvalidConfig(
            "need at least one conversation".into(),
        ));
    }
    let session = with_geometry(&cfg.session, preset);
    session.validate()?;
    let conversation = ConversationSpec {
        geometry: with_geometry(&cfg.session, "rect4").geometry,
        ..cfg.conversation.clone()
    };
    let grid = der_grid(
        &conversation,
        &[cfg.snr_db],
        cfg.n_conversations,
        cfg.seed,
        &[(session, channels)],
    )?;
    let per_conversation: Vec<DerReport> = grid.iter().map(|c| c[0][0]).collect();
    Ok(DerEvalReport {
        mics: cfg.mics,
        snr_db: cfg.snr_db,
        mean_der: mean(&per_conversation.iter().map(|r| r.der).collect::<Vec<_>>()),
        pooled: DerReport::pooled(&per_conversation).unwrap_or_default(),
        per_conversation,
    })
}
