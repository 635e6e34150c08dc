//! Synthetic source signals: white noise, a speech-like stand-in, babble,
//! and traffic rumble. All are normalized to the same RMS so levels are set
//! purely by the scene's gains.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// RMS of every generated signal (-20 dBFS).
pub const SIGNAL_RMS: f64 = 0.1;

/// Second-order IIR section, transposed direct form II.
#[derive(Debug, Clone, Copy, Default)]
pub struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
    z1: f64,
    z2: f64,
}

impl Biquad {
    fn from_coeffs(b: [f64; 3], a: [f64; 3]) -> Self {
        Self {
            b0: b[0] / a[0],
            b1: b[1] / a[0],
            b2: b[2] / a[0],
            a1: a[1] / a[0],
            a2: a[2] / a[0],
            z1: 0.0,
            z2: 0.0,
        }
    }

    pub fn lowpass(cutoff_hz: f64, q: f64, fs: f64) -> Self {
        let w = 2.0 * PI * cutoff_hz / fs;
        let (s, c) = w.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_coeffs(
            [(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    pub fn highpass(cutoff_hz: f64, q: f64, fs: f64) -> Self {
        let w = 2.0 * PI * cutoff_hz / fs;
        let (s, c) = w.sin_cos();
        let alpha = s / (2.0 * q);
        Self::from_coeffs(
            [(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    /// Constant 0 dB peak-gain bandpass.
    pub fn bandpass(center_hz: f64, q: f64, fs: f64) -> Self {
        let mut f = Self::default();
        f.retune_bandpass(center_hz, q, fs);
        f
    }

    /// Changes bandpass coefficients while keeping the filter state.
    pub fn retune_bandpass(&mut self, center_hz: f64, q: f64, fs: f64) {
        let w = 2.0 * PI * center_hz / fs;
        let (s, c) = w.sin_cos();
        let alpha = s / (2.0 * q);
        let a0 = 1.0 + alpha;
        self.b0 = alpha / a0;
        self.b1 = 0.0;
        self.b2 = -alpha / a0;
        self.a1 = -2.0 * c / a0;
        self.a2 = (1.0 - alpha) / a0;
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b0 * x + self.z1;
        self.z1 = self.b1 * x - self.a1 * y + self.z2;
        self.z2 = self.b2 * x - self.a2 * y;
        y
    }
}

/// Fourth-order Butterworth low-pass as two cascaded sections.
fn butterworth4(cutoff_hz: f64, fs: f64) -> [Biquad; 2] {
    [
        Biquad::lowpass(cutoff_hz, 0.541_196_1, fs),
        Biquad::lowpass(cutoff_hz, 1.306_563, fs),
    ]
}

fn normalize(mut x: Vec<f64>) -> Vec<f64> {
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        let g = SIGNAL_RMS / rms;
        x.iter_mut().for_each(|v| *v *= g);
    }
    x
}

fn n_samples(duration_s: f64, fs: u32) -> usize {
    (duration_s.max(0.0) * fs as f64).round() as usize
}

pub fn white_noise(duration_s: f64, seed: u64, fs: u32) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples(duration_s, fs))
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v * SIGNAL_RMS
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Syllable {
    len: usize,
    pause: usize,
    formants: [f64; 3],
    voiced: bool,
}

/// Vowel-like formant targets (F1, F2, F3) in Hz.
const VOWELS: [[f64; 3]; 6] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [300.0, 870.0, 2240.0],
    [660.0, 1720.0, 2410.0],
];

/// A speech stand-in: a drifting sawtooth voice source (100–250 Hz) shaped by
/// three formant resonators, band-limited to 4 kHz, with 3–6 Hz syllabic
/// envelopes and random 50–200 ms pauses.
pub fn speech_like(duration_s: f64, seed: u64, fs: u32) -> Vec<f64> {
    let n = n_samples(duration_s, fs);
    let fsf = fs as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut syllables = Vec::new();
    let mut total = 0;
    while total < n {
        let rate = rng.random_range(3.0..6.0);
        let len = ((fsf / rate) as usize).max(1);
        let pause = if rng.random_bool(0.3) {
            (rng.random_range(0.05..0.2) * fsf) as usize
        } else {
            0
        };
        let base = VOWELS[rng.random_range(0..VOWELS.len())];
        let jitter = rng.random_range(0.9..1.1);
        syllables.push(Syllable {
            len,
            pause,
            formants: base.map(|f| f * jitter),
            voiced: rng.random_bool(0.85),
        });
        total += len + pause;
    }

    let center_pitch = rng.random_range(120.0..200.0);
    let drift_rate = rng.random_range(0.3..0.9);
    let drift_phase = rng.random_range(0.0..2.0 * PI);
    let gains = [1.0, 0.7, 0.4];
    let mut formants = [
        Biquad::bandpass(VOWELS[0][0], 5.0, fsf),
        Biquad::bandpass(VOWELS[0][1], 8.0, fsf),
        Biquad::bandpass(VOWELS[0][2], 10.0, fsf),
    ];
    let mut lowpass = butterworth4(3600.0, fsf);
    let qs = [5.0, 8.0, 10.0];

    let mut out = Vec::with_capacity(n);
    let mut phase = 0.0;
    let mut t = 0usize;
    'outer: for s in &syllables {
        for f in 0..3 {
            formants[f].retune_bandpass(s.formants[f], qs[f], fsf);
        }
        for i in 0..s.len + s.pause {
            if t >= n {
                break 'outer;
            }
            let time = t as f64 / fsf;
            let pitch = (center_pitch + 50.0 * (2.0 * PI * drift_rate * time + drift_phase).sin())
                .clamp(100.0, 250.0);
            phase += pitch / fsf;
            phase -= phase.floor();
            let noise = rng.random_range(-1.0..1.0);
            let excitation = if s.voiced {
                2.0 * phase - 1.0 + 0.05 * noise
            } else {
                noise
            };
            let mut y = 0.0;
            for (f, g) in formants.iter_mut().zip(gains) {
                y += g * f.process(excitation);
            }
            for lp in lowpass.iter_mut() {
                y = lp.process(y);
            }
            let env = if i < s.len {
                let x = (PI * i as f64 / s.len as f64).sin();
                x * x
            } else {
                0.0
            };
            out.push(y * env);
            t += 1;
        }
    }
    out.resize(n, 0.0);
    normalize(out)
}

/// Overlapping talkers: the sum of six independent speech-like streams.
pub fn babble(duration_s: f64, seed: u64, fs: u32) -> Vec<f64> {
    let mut acc = vec![0.0; n_samples(duration_s, fs)];
    for k in 0..6 {
        let s = speech_like(duration_s, crate::simulate::mix_seed(seed, 0xBAB, k), fs);
        acc.iter_mut().zip(s).for_each(|(a, v)| *a += v);
    }
    normalize(acc)
}

/// Low-frequency rumble: leaky-integrated (brown) noise, low-passed near
/// 1 kHz with the DC drift removed.
pub fn traffic(duration_s: f64, seed: u64, fs: u32) -> Vec<f64> {
    let fsf = fs as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lp = Biquad::lowpass(1000.0, std::f64::consts::FRAC_1_SQRT_2, fsf);
    let mut hp = Biquad::highpass(20.0, std::f64::consts::FRAC_1_SQRT_2, fsf);
    let mut brown = 0.0;
    let out = (0..n_samples(duration_s, fs))
        .map(|_| {
            let w: f64 = StandardNormal.sample(&mut rng);
            brown = 0.995 * brown + w;
            hp.process(lp.process(brown))
        })
        .collect();
    normalize(out)
}
