//! Free-field acoustic scene simulator with ground truth.

pub mod conversation;
pub mod render;
pub mod signals;

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::normalize_deg;
use crate::diarize::SpeakerSegment;
use crate::error::{Error, Result};
use crate::geometry::{ArrayGeometry, GeometryConfig};
use render::{plane_wave_delays, FractionalDelay};

pub use conversation::{make_conversation, ConversationSpec};

/// Azimuths of the diffuse-field emitters.
pub const NOISE_EMITTER_AZIMUTHS: [f64; 4] = [45.0, 135.0, 225.0, 315.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalSpec {
    WhiteNoise,
    SpeechLike,
    Wav { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub azimuth_deg: f64,
    #[serde(default)]
    pub elevation_deg: f64,
    pub signal: SignalSpec,
    /// RMS level of the source while active, in dB re full scale.
    #[serde(default = "default_level")]
    pub level_dbfs: f64,
    pub active_intervals: Vec<(f64, f64)>,
}

fn default_level() -> f64 {
    -26.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    #[serde(alias = "babble-like")]
    Babble,
    #[serde(alias = "traffic-like")]
    Traffic,
    White,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseFieldSpec {
    #[serde(default = "default_emitters")]
    pub n_emitters: usize,
    pub kind: NoiseKind,
    /// Active-speech to noise power ratio. `None` renders no noise.
    pub snr_db: Option<f64>,
    /// Noise level used when the scene has no active source to reference.
    #[serde(default = "default_noise_level")]
    pub level_dbfs: f64,
}

fn default_emitters() -> usize {
    4
}

fn default_noise_level() -> f64 {
    -40.0
}

impl NoiseFieldSpec {
    pub fn new(kind: NoiseKind, snr_db: Option<f64>) -> Self {
        Self {
            n_emitters: 4,
            kind,
            snr_db,
            level_dbfs: default_noise_level(),
        }
    }

    /// Emitter azimuths: the four diagonals for the default count, evenly
    /// spaced from 45° otherwise.
    pub fn emitter_azimuths(&self) -> Vec<f64> {
        if self.n_emitters == 4 {
            return NOISE_EMITTER_AZIMUTHS.to_vec();
        }
        (0..self.n_emitters)
            .map(|i| normalize_deg(45.0 + 360.0 * i as f64 / self.n_emitters as f64))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    pub noise: Option<NoiseFieldSpec>,
}

impl SceneSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: SceneSpec = toml::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut s = Self::from_toml(&text)?;
        // relative wav paths resolve against the spec file
        if let Some(dir) = path.parent() {
            for src in &mut s.sources {
                if let SignalSpec::Wav { path } = &mut src.signal {
                    if path.is_relative() {
                        *path = dir.join(&*path);
                    }
                }
            }
        }
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidScene(e.to_string()))
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::try_from(self.geometry.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScene(m));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad("duration must be positive".into());
        }
        if self.sources.is_empty() && self.noise.is_none() {
            return bad("scene needs at least one source or a noise field".into());
        }
        for (i, s) in self.sources.iter().enumerate() {
            if !(-90.0..=90.0).contains(&s.elevation_deg) {
                return bad(format!("source {i}: elevation outside [-90, 90]"));
            }
            if !s.azimuth_deg.is_finite() || !s.level_dbfs.is_finite() {
                return bad(format!("source {i}: non-finite azimuth or level"));
            }
            for &(a, b) in &s.active_intervals {
                if !(0.0 <= a && a < b && b <= self.duration_s + 1e-9) {
                    return bad(format!(
                        "source {i}: interval ({a}, {b}) outside [0, {}]",
                        self.duration_s
                    ));
                }
            }
        }
        if let Some(n) = &self.noise {
            if n.n_emitters == 0 {
                return bad("noise field needs at least one emitter".into());
            }
        }
        self.geometry()?;
        Ok(())
    }
}

/// Deterministic seed derivation for sub-streams.
pub(crate) fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z =
        seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One utterance (or other active interval) of a source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthInterval {
    pub id: String,
    pub source: usize,
    pub azimuth_deg: f64,
    pub start_sample: u64,
    pub end_sample: u64,
}

/// What was active when, sample-accurately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub sample_rate_hz: u32,
    pub n_samples: u64,
    pub intervals: Vec<TruthInterval>,
}

impl GroundTruth {
    fn from_scene(scene: &SceneSpec, fs: u32, n_samples: u64) -> Self {
        let mut intervals = Vec::new();
        for (si, s) in scene.sources.iter().enumerate() {
            for (k, &(a, b)) in s.active_intervals.iter().enumerate() {
                let start = to_sample(a, fs).min(n_samples);
                let end = to_sample(b, fs).min(n_samples);
                if end > start {
                    intervals.push(TruthInterval {
                        id: format!("s{si}u{k}"),
                        source: si,
                        azimuth_deg: normalize_deg(s.azimuth_deg),
                        start_sample: start,
                        end_sample: end,
                    });
                }
            }
        }
        intervals.sort_by_key(|u| (u.start_sample, u.source));
        Self {
            sample_rate_hz: fs,
            n_samples,
            intervals,
        }
    }

    /// First interval covering `sample`, if any.
    pub fn active_at(&self, sample: u64) -> Option<&TruthInterval> {
        self.intervals
            .iter()
            .take_while(|u| u.start_sample <= sample)
            .find(|u| sample < u.end_sample)
    }

    pub fn is_active(&self, sample: u64) -> bool {
        self.active_at(sample).is_some()
    }

    /// Reference segments for scoring: one per interval, labeled by source.
    pub fn reference_segments(&self) -> Vec<SpeakerSegment> {
        let fs = self.sample_rate_hz as f64;
        self.intervals
            .iter()
            .map(|u| SpeakerSegment {
                start_s: u.start_sample as f64 / fs,
                end_s: u.end_sample as f64 / fs,
                speaker_label: Some(u.source),
                azimuth_deg: Some(u.azimuth_deg),
                suppressed: false,
                text: Some(u.id.clone()),
            })
            .collect()
    }

    /// Id of the interval overlapping `[start_s, end_s)` the most.
    pub fn text_for(&self, start_s: f64, end_s: f64) -> Option<String> {
        let fs = self.sample_rate_hz as f64;
        self.intervals
            .iter()
            .map(|u| {
                let a = (u.start_sample as f64 / fs).max(start_s);
                let b = (u.end_sample as f64 / fs).min(end_s);
                (b - a, u)
            })
            .filter(|(ov, _)| *ov > 0.0)
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, u)| u.id.clone())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for u in &self.intervals {
            serde_json::to_writer(&mut w, u)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R, sample_rate_hz: u32, n_samples: u64) -> Result<Self> {
        let mut intervals = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            intervals.push(serde_json::from_str(&line)?);
        }
        Ok(Self {
            sample_rate_hz,
            n_samples,
            intervals,
        })
    }
}

fn to_sample(t: f64, fs: u32) -> u64 {
    (t * fs as f64).round().max(0.0) as u64
}

fn db_to_gain(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// A rendered scene with source and noise images kept apart so the same
/// scene can be remixed at several SNRs.
#[derive(Debug, Clone)]
pub struct SceneParts {
    /// Per-mic sum of all sources.
    pub speech: Vec<Vec<f64>>,
    /// Per-mic sum of all noise emitters before level scaling.
    pub noise: Option<Vec<Vec<f64>>>,
    pub truth: GroundTruth,
    noise_spec: Option<NoiseFieldSpec>,
}

impl SceneParts {
    pub fn n_samples(&self) -> usize {
        self.speech.first().map_or(0, Vec::len)
    }

    /// Mean power of the sources over samples where any source is active,
    /// averaged across mics.
    pub fn active_speech_power(&self) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        let active: Vec<bool> = active_mask(&self.truth, self.n_samples());
        for ch in &self.speech {
            for (v, &a) in ch.iter().zip(&active) {
                if a {
                    sum += v * v;
                    count += 1;
                }
            }
        }
        (count > 0 && sum > 0.0).then(|| sum / count as f64)
    }

    /// Mean power of the unscaled noise image across mics.
    pub fn raw_noise_power(&self) -> Option<f64> {
        let noise = self.noise.as_ref()?;
        let n: usize = noise.iter().map(Vec::len).sum();
        let p = noise.iter().flatten().map(|v| v * v).sum::<f64>() / n.max(1) as f64;
        (p > 0.0).then_some(p)
    }

    /// Gain applied to the noise image for a requested SNR (`None` = clean).
    /// With no source activity the noise field's absolute level is used.
    pub fn noise_gain(&self, snr_db: Option<f64>) -> f64 {
        let Some(noise_power) = self.raw_noise_power() else {
            return 0.0;
        };
        match self.active_speech_power() {
            Some(sp) => snr_db.map_or(0.0, |snr| {
                (sp / (noise_power * 10f64.powf(snr / 10.0))).sqrt()
            }),
            None => {
                let level = self
                    .noise_spec
                    .as_ref()
                    .map_or(default_noise_level(), |n| n.level_dbfs);
                db_to_gain(level) / noise_power.sqrt()
            }
        }
    }

    /// Mixes sources and noise at the scene's own SNR.
    pub fn mix_default(&self) -> Vec<Vec<f64>> {
        self.mix(self.noise_spec.as_ref().and_then(|n| n.snr_db))
    }

    /// Mixes sources and noise at `snr_db` (`None` = clean).
    pub fn mix(&self, snr_db: Option<f64>) -> Vec<Vec<f64>> {
        let g = self.noise_gain(snr_db);
        match (&self.noise, g > 0.0) {
            (Some(noise), true) => self
                .speech
                .iter()
                .zip(noise)
                .map(|(s, n)| s.iter().zip(n).map(|(a, b)| a + g * b).collect())
                .collect(),
            _ => self.speech.clone(),
        }
    }
}

fn active_mask(truth: &GroundTruth, n: usize) -> Vec<bool> {
    let mut mask = vec![false; n];
    for u in &truth.intervals {
        let end = (u.end_sample as usize).min(n);
        for m in &mut mask[(u.start_sample as usize).min(end)..end] {
            *m = true;
        }
    }
    mask
}

fn generate_source(spec: &SignalSpec, n: usize, seed: u64, fs: u32) -> Result<Vec<f64>> {
    let dur = n as f64 / fs as f64;
    let mut x = match spec {
        SignalSpec::WhiteNoise => signals::white_noise(dur, seed, fs),
        SignalSpec::SpeechLike => signals::speech_like(dur, seed, fs),
        SignalSpec::Wav { path } => {
            let audio = crate::wav::read_wav(path).map_err(|e| Error::AudioSource {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            if audio.sample_rate_hz != fs {
                return Err(Error::AudioSource {
                    path: path.clone(),
                    reason: format!(
                        "sample rate {} Hz, scene needs {fs} Hz",
                        audio.sample_rate_hz
                    ),
                });
            }
            let ch = audio.channels.into_iter().next().unwrap_or_default();
            if ch.len() < n {
                return Err(Error::AudioSource {
                    path: path.clone(),
                    reason: format!("{} samples, interval needs {n}", ch.len()),
                });
            }
            let mut ch = ch;
            ch.truncate(n);
            let rms = (ch.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64).sqrt();
            if rms > 0.0 {
                ch.iter_mut().for_each(|v| *v *= signals::SIGNAL_RMS / rms);
            }
            ch
        }
    };
    x.resize(n, 0.0);
    Ok(x)
}

fn noise_signal(kind: NoiseKind, dur: f64, seed: u64, fs: u32) -> Vec<f64> {
    match kind {
        NoiseKind::Babble => signals::babble(dur, seed, fs),
        NoiseKind::Traffic => signals::traffic(dur, seed, fs),
        NoiseKind::White => signals::white_noise(dur, seed, fs),
    }
}

/// Renders a far-field source signal onto every mic of the array.
/// `offset` is the output sample at which the signal starts; output is
/// `n_samples` long.
pub fn render_plane_wave(
    geometry: &ArrayGeometry,
    signal: &[f64],
    azimuth_deg: f64,
    elevation_deg: f64,
    offset: i64,
    gain: f64,
    n_samples: usize,
) -> Vec<Vec<f64>> {
    plane_wave_delays(geometry, azimuth_deg, elevation_deg)
        .into_iter()
        .map(|d| {
            let mut out = vec![0.0; n_samples];
            FractionalDelay::new(d).apply_add(signal, offset, gain, &mut out);
            out
        })
        .collect()
}

/// Diffuse field of mutually uncorrelated emitters at unit signal gain.
pub fn render_noise_field(
    geometry: &ArrayGeometry,
    spec: &NoiseFieldSpec,
    n_samples: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let fs = geometry.sample_rate_hz();
    let dur = n_samples as f64 / fs as f64;
    let images: Vec<Vec<Vec<f64>>> = spec
        .emitter_azimuths()
        .par_iter()
        .enumerate()
        .map(|(e, &az)| {
            let mut sig = noise_signal(spec.kind, dur, mix_seed(seed, 0xA015E, e as u64), fs);
            sig.resize(n_samples, 0.0);
            render_plane_wave(geometry, &sig, az, 0.0, 0, 1.0, n_samples)
        })
        .collect();
    let mut acc = vec![vec![0.0; n_samples]; geometry.n_mics()];
    for img in images {
        for (a, ch) in acc.iter_mut().zip(img) {
            a.iter_mut().zip(ch).for_each(|(x, v)| *x += v);
        }
    }
    acc
}

/// Generates the dry signal of a source for `n` samples.
pub fn source_signal(spec: &SignalSpec, n: usize, seed: u64, fs: u32) -> Result<Vec<f64>> {
    generate_source(spec, n, seed, fs)
}

/// Renders sources and noise separately.
pub fn render_parts(scene: &SceneSpec) -> Result<SceneParts> {
    scene.validate()?;
    let geometry = scene.geometry()?;
    let fs = geometry.sample_rate_hz();
    let n = to_sample(scene.duration_s, fs) as usize;
    let n_mics = geometry.n_mics();
    let truth = GroundTruth::from_scene(scene, fs, n as u64);

    let mut speech = vec![vec![0.0; n]; n_mics];
    for (si, s) in scene.sources.iter().enumerate() {
        let gain = db_to_gain(s.level_dbfs) / signals::SIGNAL_RMS;
        for (k, &(a, b)) in s.active_intervals.iter().enumerate() {
            let start = to_sample(a, fs).min(n as u64) as usize;
            let end = to_sample(b, fs).min(n as u64) as usize;
            if end <= start {
                continue;
            }
            let sig = generate_source(
                &s.signal,
                end - start,
                mix_seed(scene.seed, si as u64, k as u64),
                fs,
            )?;
            // rendered activity stays inside the truth interval
            let img = render_plane_wave(
                &geometry,
                &sig,
                s.azimuth_deg,
                s.elevation_deg,
                0,
                gain,
                end - start,
            );
            for (ch, part) in speech.iter_mut().zip(img) {
                ch[start..end]
                    .iter_mut()
                    .zip(part)
                    .for_each(|(o, v)| *o += v);
            }
        }
    }

    let noise = match &scene.noise {
        Some(spec) if spec.snr_db.is_some() || scene.sources.is_empty() => {
            Some(render_noise_field(&geometry, spec, n, scene.seed))
        }
        _ => None,
    };

    Ok(SceneParts {
        speech,
        noise,
        truth,
        noise_spec: scene.noise.clone(),
    })
}

/// Multichannel PCM and ground truth for a scene.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub channels: Vec<Vec<f64>>,
    pub truth: GroundTruth,
    pub sample_rate_hz: u32,
}

pub fn render(scene: &SceneSpec) -> Result<Rendered> {
    let parts = render_parts(scene)?;
    let channels = parts.mix_default();
    Ok(Rendered {
        channels,
        sample_rate_hz: parts.truth.sample_rate_hz,
        truth: parts.truth,
    })
}
