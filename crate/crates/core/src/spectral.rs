//! Pairwise delay estimation with partially normalized GCC-PHAT.
//!
//! Delay sign convention: a positive delay means the sound reached mic `a`
//! of the pair before mic `b`. Combined with the pair axis (pointing from b
//! to a), `delay_to_angle` then measures the local angle from the axis
//! toward mic a.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::MicPair;

/// Samples per channel per block (11.6 ms at 44.1 kHz).
pub const DEFAULT_FRAME_LEN: usize = 512;
/// Exponent of the cross-spectrum magnitude in the GCC denominator.
pub const DEFAULT_RHO: f64 = -0.3;
pub const DEFAULT_GATE_RATIO: f64 = 4.0;
pub const DEFAULT_SILENCE_RMS: f64 = 1e-4;

/// Bins whose cross-spectrum magnitude falls below this fraction of the
/// largest bin are zeroed instead of normalized.
const RELATIVE_EPSILON: f64 = 1e-12;

/// One synchronized multichannel block of PCM samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameBlock {
    channels: Vec<Vec<f64>>,
    start_sample: u64,
}

impl FrameBlock {
    pub fn new(channels: Vec<Vec<f64>>, start_sample: u64) -> Result<Self> {
        let len = channels
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::MalformedBlock("block has no channels".into()))?;
        if len == 0 {
            return Err(Error::MalformedBlock("block has no samples".into()));
        }
        if let Some((i, c)) = channels.iter().enumerate().find(|(_, c)| c.len() != len) {
            return Err(Error::MalformedBlock(format!(
                "channel {i} has {} samples, channel 0 has {len}",
                c.len()
            )));
        }
        Ok(Self {
            channels,
            start_sample,
        })
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel(&self, i: usize) -> &[f64] {
        &self.channels[i]
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn frame_len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn start_sample(&self) -> u64 {
        self.start_sample
    }

    pub fn channel_rms(&self, i: usize) -> f64 {
        rms(&self.channels[i])
    }
}

pub(crate) fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Linear cross-correlation sequence in FFT order: index 0 holds lag 0,
/// indices `1..len/2` positive lags, and the upper half negative lags.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCorrelation {
    values: Vec<f64>,
}

impl CrossCorrelation {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest representable lag magnitude.
    pub fn max_lag(&self) -> usize {
        self.values.len() / 2 - 1
    }

    pub fn at(&self, lag: isize) -> f64 {
        let n = self.values.len() as isize;
        self.values[lag.rem_euclid(n) as usize]
    }

    /// Raw values in FFT order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(lag, value)` pairs from the most negative to the most positive lag.
    pub fn centered(&self) -> Vec<(isize, f64)> {
        let m = self.max_lag() as isize;
        (-m..=m).map(|l| (l, self.at(l))).collect()
    }

    /// Lag of the largest value within `[-radius, radius]`. Ties go to the
    /// most negative lag.
    pub fn argmax_within(&self, radius: usize) -> (isize, f64) {
        let r = radius.min(self.max_lag()) as isize;
        let mut best = (-r, self.at(-r));
        for lag in -r + 1..=r {
            let v = self.at(lag);
            if v > best.1 {
                best = (lag, v);
            }
        }
        best
    }

    pub fn mean_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() / self.values.len() as f64
    }
}

/// FFT size used for a frame: the next power of two that holds the full
/// linear correlation (no circular wraparound).
pub fn padded_len(frame_len: usize) -> usize {
    (2 * frame_len).next_power_of_two()
}

/// Generalized cross-correlation of two equal-length frames with the cross
/// spectrum divided by its magnitude raised to `rho`.
///
/// `rho = 1` is classic PHAT, `rho = 0` plain cross-correlation, and the
/// default `-0.3` multiplies the cross spectrum by `|X1 X2*|^0.3`. The value
/// at lag `l` is `sum_n a[n] b[n - l]`, so the peak sits at the number of
/// samples by which `frame_a` lags `frame_b`.
pub fn gcc_phat(frame_a: &[f64], frame_b: &[f64], rho: f64) -> Result<CrossCorrelation> {
    if frame_a.len() != frame_b.len() {
        return Err(Error::LengthMismatch(frame_a.len(), frame_b.len()));
    }
    if frame_a.is_empty() {
        return Err(Error::MalformedBlock("empty frame".into()));
    }
    let n = padded_len(frame_a.len());
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let spectrum = |x: &[f64]| {
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(n, Complex::new(0.0, 0.0));
        fwd.process(&mut buf);
        buf
    };
    let xa = spectrum(frame_a);
    let xb = spectrum(frame_b);

    let mut cross: Vec<Complex<f64>> = xa.iter().zip(&xb).map(|(a, b)| a * b.conj()).collect();
    let peak = cross.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let eps = (peak * RELATIVE_EPSILON).max(f64::MIN_POSITIVE);
    for c in cross.iter_mut() {
        let m = c.norm();
        *c = if m < eps {
            Complex::new(0.0, 0.0)
        } else {
            *c / m.powf(rho)
        };
    }
    inv.process(&mut cross);
    let scale = 1.0 / n as f64;
    Ok(CrossCorrelation {
        values: cross.iter().map(|c| c.re * scale).collect(),
    })
}

/// Far-field conversion of a pair delay into the angle between the source
/// direction and the pair axis, in `[0, 180]` degrees.
pub fn delay_to_angle(delay_samples: f64, max_delay_samples: f64) -> f64 {
    debug_assert!(max_delay_samples > 0.0);
    (delay_samples / max_delay_samples)
        .clamp(-1.0, 1.0)
        .acos()
        .to_degrees()
}

/// Delay-estimation knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayConfig {
    pub rho: f64,
    /// A peak is accepted only if it is at least this many times the mean
    /// absolute correlation.
    pub gate_ratio: f64,
    /// Blocks whose pair RMS is below this level never yield a delay.
    pub silence_rms: f64,
    /// Three-point parabolic refinement around the integer peak.
    pub refine: bool,
}

impl Default for DelayConfig {
    fn default() -> Self {
        Self {
            rho: DEFAULT_RHO,
            gate_ratio: DEFAULT_GATE_RATIO,
            silence_rms: DEFAULT_SILENCE_RMS,
            refine: false,
        }
    }
}

impl DelayConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.rho.is_finite() {
            return Err(Error::InvalidConfig("rho must be finite".into()));
        }
        if !(self.gate_ratio >= 0.0) || !(self.silence_rms >= 0.0) {
            return Err(Error::InvalidConfig(
                "gate thresholds must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Result of correlating one pair in one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayEstimate {
    pub pair: MicPair,
    pub delay_samples: f64,
    pub peak_value: f64,
    pub valid: bool,
}

impl DelayEstimate {
    /// Local angle for a valid estimate.
    pub fn local_angle_deg(&self) -> Option<f64> {
        self.valid
            .then(|| delay_to_angle(self.delay_samples, self.pair.max_delay_samples))
    }
}

/// Block-oriented delay estimator. Plans the FFTs once and transforms each
/// channel once per block, so a block with `n` mics costs `n` forward and
/// `n(n-1)/2` inverse transforms.
pub struct DelayEstimator {
    cfg: DelayConfig,
    frame_len: usize,
    fft_len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    spectra: Vec<Vec<Complex<f64>>>,
    magnitudes: Vec<Vec<f64>>,
    cross: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl DelayEstimator {
    pub fn new(cfg: DelayConfig, frame_len: usize) -> Result<Self> {
        cfg.validate()?;
        if frame_len == 0 {
            return Err(Error::InvalidConfig("frame length must be positive".into()));
        }
        let fft_len = padded_len(frame_len);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(fft_len);
        let inv = planner.plan_fft_inverse(fft_len);
        let scratch_len = fwd
            .get_inplace_scratch_len()
            .max(inv.get_inplace_scratch_len());
        Ok(Self {
            cfg,
            frame_len,
            fft_len,
            fwd,
            inv,
            spectra: Vec::new(),
            magnitudes: Vec::new(),
            cross: vec![Complex::new(0.0, 0.0); fft_len],
            scratch: vec![Complex::new(0.0, 0.0); scratch_len],
        })
    }

    pub fn config(&self) -> &DelayConfig {
        &self.cfg
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    fn load_block(&mut self, block: &FrameBlock) -> Result<()> {
        if block.frame_len() != self.frame_len {
            return Err(Error::MalformedBlock(format!(
                "expected {} samples per channel, got {}",
                self.frame_len,
                block.frame_len()
            )));
        }
        let n = self.fft_len;
        self.spectra.resize_with(block.n_channels(), Vec::new);
        self.magnitudes.resize_with(block.n_channels(), Vec::new);
        for (ch, (spec, mags)) in block
            .channels()
            .iter()
            .zip(self.spectra.iter_mut().zip(self.magnitudes.iter_mut()))
        {
            spec.clear();
            spec.extend(ch.iter().map(|&v| Complex::new(v, 0.0)));
            spec.resize(n, Complex::new(0.0, 0.0));
            self.fwd.process_with_scratch(spec, &mut self.scratch);
            mags.clear();
            mags.extend(spec.iter().map(|c| c.norm()));
        }
        Ok(())
    }

    /// Weighted cross-correlation for `pair` after `load_block`. The
    /// correlation is of channel b against channel a, so its peak lag is the
    /// delay in this module's sign convention.
    fn correlate_loaded(&mut self, pair: &MicPair) -> CrossCorrelation {
        let n = self.fft_len;
        let (xa, xb) = (&self.spectra[pair.index_a], &self.spectra[pair.index_b]);
        let (ma, mb) = (
            &self.magnitudes[pair.index_a],
            &self.magnitudes[pair.index_b],
        );
        let peak = ma.iter().zip(mb).map(|(a, b)| a * b).fold(0.0, f64::max);
        let eps = (peak * RELATIVE_EPSILON).max(f64::MIN_POSITIVE);
        let rho = self.cfg.rho;
        // Real inputs give a Hermitian cross spectrum: weight half, mirror the rest.
        let half = n / 2;
        for k in 0..=half {
            let m = ma[k] * mb[k];
            let w = if m < eps {
                0.0
            } else if rho == 0.0 {
                1.0
            } else {
                m.powf(-rho)
            };
            self.cross[k] = xb[k] * xa[k].conj() * w;
            if k != 0 && k != half {
                self.cross[n - k] = self.cross[k].conj();
            }
        }
        self.inv
            .process_with_scratch(&mut self.cross, &mut self.scratch);
        let scale = 1.0 / n as f64;
        CrossCorrelation {
            values: self.cross.iter().map(|c| c.re * scale).collect(),
        }
    }

    /// The weighted correlation the estimator uses for one pair.
    pub fn correlate(&mut self, block: &FrameBlock, pair: &MicPair) -> Result<CrossCorrelation> {
        self.check_pair(block, pair)?;
        self.load_block(block)?;
        Ok(self.correlate_loaded(pair))
    }

    fn check_pair(&self, block: &FrameBlock, pair: &MicPair) -> Result<()> {
        if pair.index_a.max(pair.index_b) >= block.n_channels() {
            return Err(Error::MalformedBlock(format!(
                "pair ({}, {}) needs more than {} channels",
                pair.index_a,
                pair.index_b,
                block.n_channels()
            )));
        }
        Ok(())
    }

    /// Delay estimates for every pair of one block, in pair order.
    pub fn estimate_block(
        &mut self,
        block: &FrameBlock,
        pairs: &[MicPair],
    ) -> Result<Vec<DelayEstimate>> {
        for p in pairs {
            self.check_pair(block, p)?;
        }
        self.load_block(block)?;
        let rms: Vec<f64> = (0..block.n_channels())
            .map(|i| block.channel_rms(i))
            .collect();
        Ok(pairs
            .iter()
            .map(|pair| {
                let loud = 0.5 * (rms[pair.index_a] + rms[pair.index_b]) >= self.cfg.silence_rms;
                if !loud {
                    return DelayEstimate {
                        pair: *pair,
                        delay_samples: 0.0,
                        peak_value: 0.0,
                        valid: false,
                    };
                }
                let corr = self.correlate_loaded(pair);
                self.pick_peak(pair, &corr)
            })
            .collect())
    }

    fn pick_peak(&self, pair: &MicPair, corr: &CrossCorrelation) -> DelayEstimate {
        let (lag, peak) = corr.argmax_within(pair.search_radius());
        let mut delay = lag as f64;
        if self.cfg.refine {
            let (l, c, r) = (corr.at(lag - 1), peak, corr.at(lag + 1));
            let denom = l - 2.0 * c + r;
            if denom < 0.0 {
                delay += (0.5 * (l - r) / denom).clamp(-0.5, 0.5);
            }
        }
        let valid = peak > 0.0 && peak >= self.cfg.gate_ratio * corr.mean_abs();
        DelayEstimate {
            pair: *pair,
            delay_samples: delay,
            peak_value: peak.max(0.0),
            valid,
        }
    }
}

/// One-shot delay estimate for a single pair with default gates.
pub fn estimate_delay(block: &FrameBlock, pair: &MicPair, rho: f64) -> Result<DelayEstimate> {
    let cfg = DelayConfig {
        rho,
        ..DelayConfig::default()
    };
    let mut est = DelayEstimator::new(cfg, block.frame_len())?;
    Ok(est.estimate_block(block, std::slice::from_ref(pair))?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ArrayGeometry;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-0.5..0.5)).collect()
    }

    /// Direct time-domain linear cross-correlation, `sum_n a[n] b[n - lag]`.
    fn direct_xcorr(a: &[f64], b: &[f64], lag: isize) -> f64 {
        let n = a.len() as isize;
        (0..n)
            .filter_map(|i| {
                let j = i - lag;
                (0..n).contains(&j).then(|| a[i as usize] * b[j as usize])
            })
            .sum()
    }

    fn circular_shift(x: &[f64], k: usize) -> Vec<f64> {
        let n = x.len();
        (0..n).map(|i| x[(i + n - k) % n]).collect()
    }

    fn argmax(c: &CrossCorrelation) -> isize {
        c.argmax_within(c.max_lag()).0
    }

    #[test]
    fn autocorrelation_peaks_at_zero_lag() {
        let a = noise(512, 1);
        let c = gcc_phat(&a, &a, 1.0).unwrap();
        assert_eq!(c.len(), 1024);
        assert_eq!(argmax(&c), 0);
    }

    #[test]
    fn delayed_copy_peaks_at_negative_shift() {
        let a = noise(512, 2);
        let b = circular_shift(&a, 5);
        // oracle: direct correlation agrees on where the peak is
        let direct = (-20..=20)
            .max_by(|&x, &y| direct_xcorr(&a, &b, x).total_cmp(&direct_xcorr(&a, &b, y)))
            .unwrap();
        assert_eq!(direct, -5);
        for rho in [0.0, 1.0, DEFAULT_RHO] {
            assert_eq!(argmax(&gcc_phat(&a, &b, rho).unwrap()), -5, "rho {rho}");
        }
    }

    #[test]
    fn full_phat_on_white_noise_is_impulse_like() {
        let a = noise(512, 3);
        let b = circular_shift(&a, 3);
        let c = gcc_phat(&a, &b, 1.0).unwrap();
        let peak = c.at(-3);
        let side = c
            .centered()
            .into_iter()
            .filter(|&(l, _)| l != -3)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max);
        assert!(peak > 5.0 * side, "peak {peak} sidelobe {side}");
        // the direct normalized correlation has its peak at the same lag
        let norm = direct_xcorr(&a, &a, 0);
        assert!(direct_xcorr(&a, &b, -3) / norm > 0.9);
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let z = vec![0.0; 512];
        let c = gcc_phat(&z, &z, DEFAULT_RHO).unwrap();
        assert!(c.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        assert!(matches!(
            gcc_phat(&[0.0; 4], &[0.0; 5], 1.0),
            Err(Error::LengthMismatch(4, 5))
        ));
    }

    #[test]
    fn rho_zero_matches_direct_correlation() {
        for (len, seed) in [(64, 10), (300, 11), (1024, 12)] {
            let a = noise(len, seed);
            let b = noise(len, seed + 100);
            let c = gcc_phat(&a, &b, 0.0).unwrap();
            let scale = direct_xcorr(&a, &a, 0).max(direct_xcorr(&b, &b, 0));
            for lag in -(len as isize - 1)..len as isize {
                let d = direct_xcorr(&a, &b, lag);
                assert!((c.at(lag) - d).abs() <= 1e-6 * scale, "len {len} lag {lag}");
            }
        }
    }

    #[test]
    fn delay_to_angle_examples() {
        assert!((delay_to_angle(0.0, 10.3) - 90.0).abs() < 1e-12);
        assert!(delay_to_angle(10.3, 10.3).abs() < 1e-12);
        assert!((delay_to_angle(-10.3, 10.3) - 180.0).abs() < 1e-12);
        assert!((delay_to_angle(5.15, 10.3) - 60.0).abs() < 1e-9);
        // clamping absorbs over-range delays
        assert_eq!(delay_to_angle(12.0, 10.3), 0.0);
    }

    #[test]
    fn integer_lag_resolution_near_broadside() {
        let g = ArrayGeometry::new(vec![[0.0, 0.0], [0.08, 0.0]], 44_100, 343.0).unwrap();
        let p = g.pairs()[0];
        let gap =
            delay_to_angle(0.0, p.max_delay_samples) - delay_to_angle(1.0, p.max_delay_samples);
        assert!((5.0..=10.0).contains(&gap), "gap {gap}");
    }

    fn two_channel_block(a: Vec<f64>, b: Vec<f64>) -> FrameBlock {
        FrameBlock::new(vec![a, b], 0).unwrap()
    }

    fn pair_80mm() -> MicPair {
        ArrayGeometry::new(vec![[0.04, 0.0], [-0.04, 0.0]], 44_100, 343.0)
            .unwrap()
            .pairs()[0]
    }

    #[test]
    fn broadside_and_endfire_delays() {
        let src = noise(600, 4);
        let pair = pair_80mm();
        let same = two_channel_block(src[..512].to_vec(), src[..512].to_vec());
        let d = estimate_delay(&same, &pair, DEFAULT_RHO).unwrap();
        assert!(d.valid);
        assert_eq!(d.delay_samples, 0.0);
        // mic a hears the sound 10 samples before mic b
        let a = src[10..522].to_vec();
        let b = src[0..512].to_vec();
        let d = estimate_delay(&two_channel_block(a, b), &pair, DEFAULT_RHO).unwrap();
        assert!(d.valid);
        assert_eq!(d.delay_samples, 10.0);
        assert!(d.local_angle_deg().unwrap() < 15.0);
    }

    #[test]
    fn silent_block_is_invalid() {
        let z = vec![0.0; 512];
        let d =
            estimate_delay(&two_channel_block(z.clone(), z), &pair_80mm(), DEFAULT_RHO).unwrap();
        assert!(!d.valid);
        assert!(d.local_angle_deg().is_none());
    }

    #[test]
    fn block_estimator_matches_reference_gcc() {
        let src = noise(600, 5);
        let block = two_channel_block(src[3..515].to_vec(), src[..512].to_vec());
        let pair = pair_80mm();
        for rho in [0.0, 1.0, DEFAULT_RHO] {
            let mut est = DelayEstimator::new(
                DelayConfig {
                    rho,
                    ..Default::default()
                },
                512,
            )
            .unwrap();
            let fast = est.correlate(&block, &pair).unwrap();
            let slow = gcc_phat(block.channel(1), block.channel(0), rho).unwrap();
            let scale = slow.values().iter().map(|v| v.abs()).fold(0.0, f64::max);
            for (x, y) in fast.values().iter().zip(slow.values()) {
                assert!((x - y).abs() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn parabolic_refinement_recovers_fractional_delay() {
        // band-limited signal delayed by 2.5 samples via a frequency-domain shift
        let n = 4096;
        let src = noise(n, 6);
        let shifted = crate::simulate::render::fractional_delay_reference(&src, 2.5);
        let block = two_channel_block(src[1000..1512].to_vec(), shifted[1000..1512].to_vec());
        let cfg = DelayConfig {
            refine: true,
            rho: 1.0,
            ..Default::default()
        };
        let mut est = DelayEstimator::new(cfg, 512).unwrap();
        let d = est.estimate_block(&block, &[pair_80mm()]).unwrap()[0];
        assert!((d.delay_samples - 2.5).abs() < 0.25, "{}", d.delay_samples);
    }

    #[test]
    fn wrong_frame_length_is_malformed() {
        let mut est = DelayEstimator::new(DelayConfig::default(), 512).unwrap();
        let block = two_channel_block(vec![0.1; 256], vec![0.1; 256]);
        assert!(matches!(
            est.estimate_block(&block, &[pair_80mm()]),
            Err(Error::MalformedBlock(_))
        ));
        assert!(FrameBlock::new(vec![vec![0.0; 4], vec![0.0; 3]], 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn swapping_channels_negates_delay(seed in 0u64..10_000, shift in 0usize..=10) {
            let src = noise(600, seed);
            let a = src[shift..512 + shift].to_vec();
            let b = src[..512].to_vec();
            let pair = pair_80mm();
            let block = two_channel_block(a, b);
            let fwd = estimate_delay(&block, &pair, DEFAULT_RHO).unwrap();
            let rev = estimate_delay(&block, &pair.swapped(), DEFAULT_RHO).unwrap();
            prop_assert_eq!(fwd.delay_samples, shift as f64);
            prop_assert_eq!(rev.delay_samples, -fwd.delay_samples);
        }

        #[test]
        fn delay_is_amplitude_invariant(seed in 0u64..10_000, shift in 0usize..=10, k in 0.01f64..100.0) {
            let src = noise(600, seed);
            let a = src[shift..512 + shift].to_vec();
            let b = src[..512].to_vec();
            let pair = pair_80mm();
            for rho in [1.0, DEFAULT_RHO] {
                let base = estimate_delay(&two_channel_block(a.clone(), b.clone()), &pair, rho).unwrap();
                let scaled = estimate_delay(
                    &two_channel_block(a.iter().map(|v| v * k).collect(), b.iter().map(|v| v * k).collect()),
                    &pair,
                    rho,
                ).unwrap();
                prop_assert_eq!(base.delay_samples, scaled.delay_samples);
            }
        }
    }
}
