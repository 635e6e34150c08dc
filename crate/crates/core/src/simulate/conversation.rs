//! Turn-taking conversation scenes.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NoiseFieldSpec, SceneSpec, SignalSpec, SourceSpec};
use crate::error::{Error, Result};
use crate::geometry::GeometryConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConversationSpec {
    pub n_talkers: usize,
    pub azimuths: Vec<f64>,
    pub mean_duration_s: f64,
    pub seed: u64,
    pub level_dbfs: f64,
    pub geometry: GeometryConfig,
    pub noise: Option<NoiseFieldSpec>,
    /// Recordings to draw utterances from instead of the synthetic voice.
    /// Each utterance uses one file, picked at random.
    pub wav_pool: Vec<PathBuf>,
}

impl Default for ConversationSpec {
    fn default() -> Self {
        Self {
            n_talkers: 4,
            azimuths: vec![0.0, 90.0, 180.0, 270.0],
            mean_duration_s: 40.0,
            seed: 0,
            level_dbfs: -26.0,
            geometry: GeometryConfig::preset("rect4"),
            noise: None,
            wav_pool: Vec::new(),
        }
    }
}

const UTTERANCE_S: (f64, f64) = (2.0, 6.0);
const GAP_S: (f64, f64) = (0.2, 0.5);
/// Chance that the next turn goes to the next talker in order.
const ROUND_ROBIN_P: f64 = 0.75;

/// Builds a conversation of non-overlapping turns. Each talker becomes one
/// source whose active intervals are its turns.
pub fn make_conversation(spec: &ConversationSpec) -> Result<SceneSpec> {
    if spec.n_talkers == 0 || spec.n_talkers != spec.azimuths.len() {
        return Err(Error::InvalidScene(format!(
            "{} talkers but {} azimuths",
            spec.n_talkers,
            spec.azimuths.len()
        )));
    }
    if !(spec.mean_duration_s > UTTERANCE_S.1) {
        return Err(Error::InvalidScene(
            "conversation must be longer than one utterance".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut turns: Vec<Vec<(f64, f64)>> = vec![Vec::new(); spec.n_talkers];
    let mut talker = rng.random_range(0..spec.n_talkers);
    let mut t = rng.random_range(GAP_S.0..GAP_S.1);
    // stop early enough that the expected total lands on the mean
    let stop = spec.mean_duration_s - 0.5 * (UTTERANCE_S.0 + UTTERANCE_S.1) / 2.0;
    let mut end = t;
    let mut pool_picks = Vec::new();
    while t < stop {
        let len = rng.random_range(UTTERANCE_S.0..UTTERANCE_S.1);
        let (a, b) = (round_ms(t), round_ms(t + len));
        turns[talker].push((a, b));
        if !spec.wav_pool.is_empty() {
            pool_picks.push((talker, rng.random_range(0..spec.wav_pool.len())));
        }
        end = b;
        t = b + rng.random_range(GAP_S.0..GAP_S.1);
        talker = if spec.n_talkers == 1 || rng.random_bool(ROUND_ROBIN_P) {
            (talker + 1) % spec.n_talkers
        } else {
            rng.random_range(0..spec.n_talkers)
        };
    }
    let duration_s = round_ms(end + rng.random_range(GAP_S.0..GAP_S.1));

    let sources = if spec.wav_pool.is_empty() {
        turns
            .into_iter()
            .zip(&spec.azimuths)
            .map(|(intervals, &az)| SourceSpec {
                azimuth_deg: az,
                elevation_deg: 0.0,
                signal: SignalSpec::SpeechLike,
                level_dbfs: spec.level_dbfs,
                active_intervals: intervals,
            })
            .collect()
    } else {
        // one source per utterance so each can carry its own recording
        let mut next = vec![0usize; spec.n_talkers];
        pool_picks
            .into_iter()
            .map(|(talker, file)| {
                let iv = turns[talker][next[talker]];
                next[talker] += 1;
                SourceSpec {
                    azimuth_deg: spec.azimuths[talker],
                    elevation_deg: 0.0,
                    signal: SignalSpec::Wav {
                        path: spec.wav_pool[file].clone(),
                    },
                    level_dbfs: spec.level_dbfs,
                    active_intervals: vec![iv],
                }
            })
            .collect()
    };

    Ok(SceneSpec {
        duration_s,
        seed: spec.seed,
        geometry: spec.geometry.clone(),
        sources,
        noise: spec.noise.clone(),
    })
}

fn round_ms(t: f64) -> f64 {
    (t * 1000.0).round() / 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(seed: u64) -> SceneSpec {
        make_conversation(&ConversationSpec {
            seed,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn deterministic() {
        assert_eq!(conv(4), conv(4));
        assert_ne!(conv(4), conv(5));
    }

    #[test]
    fn utterances_do_not_overlap_and_respect_bounds() {
        for seed in 0..20 {
            let s = conv(seed);
            let mut all: Vec<(f64, f64)> = s
                .sources
                .iter()
                .flat_map(|x| x.active_intervals.clone())
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in all.windows(2) {
                let gap = w[1].0 - w[0].1;
                assert!((0.199..=0.501).contains(&gap), "gap {gap}");
            }
            for (a, b) in &all {
                assert!((1.999..=6.001).contains(&(b - a)));
            }
            s.validate().unwrap();
        }
    }

    #[test]
    fn mean_duration_near_forty_seconds() {
        let mean = (0..100).map(|s| conv(s).duration_s).sum::<f64>() / 100.0;
        assert!((mean - 40.0).abs() <= 4.0, "{mean}");
    }

    #[test]
    fn single_talker_shares_azimuth() {
        let s = make_conversation(&ConversationSpec {
            n_talkers: 1,
            azimuths: vec![120.0],
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(s.sources.len(), 1);
        assert!(s.sources[0].active_intervals.len() > 3);
    }

    #[test]
    fn talker_count_must_match_azimuths() {
        let r = make_conversation(&ConversationSpec {
            n_talkers: 3,
            ..Default::default()
        });
        assert!(r.is_err());
    }

    #[test]
    fn every_talker_speaks() {
        let s = conv(2);
        assert!(s.sources.iter().all(|x| !x.active_intervals.is_empty()));
    }
}
