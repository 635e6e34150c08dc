//! Far-field plane-wave rendering with windowed-sinc fractional delays.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};

use crate::geometry::ArrayGeometry;

/// Interpolation kernel length.
pub const FRACTIONAL_TAPS: usize = 32;
const HALF: f64 = (FRACTIONAL_TAPS / 2) as f64;

/// A fixed delay split into an integer part and a 32-tap Blackman-windowed
/// sinc for the fractional remainder.
#[derive(Debug, Clone)]
pub struct FractionalDelay {
    integer: i64,
    taps: [f64; FRACTIONAL_TAPS],
}

impl FractionalDelay {
    pub fn new(delay_samples: f64) -> Self {
        let integer = delay_samples.floor();
        let frac = delay_samples - integer;
        let mut taps = [0.0; FRACTIONAL_TAPS];
        for (t, tap) in taps.iter_mut().enumerate() {
            // tap t weights x[n - integer - m] with m = t - 15
            let u = (t as f64 - (HALF - 1.0)) - frac;
            let sinc = if u.abs() < 1e-12 {
                1.0
            } else {
                (PI * u).sin() / (PI * u)
            };
            let w = if u.abs() >= HALF {
                0.0
            } else {
                0.42 + 0.5 * (PI * u / HALF).cos() + 0.08 * (2.0 * PI * u / HALF).cos()
            };
            *tap = sinc * w;
        }
        let sum: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= sum);
        Self {
            integer: integer as i64,
            taps,
        }
    }

    /// Adds `gain * src` delayed by this filter into `dst`, where `src[0]`
    /// sits at output sample `offset` before delaying.
    pub fn apply_add(&self, src: &[f64], offset: i64, gain: f64, dst: &mut [f64]) {
        if src.is_empty() {
            return;
        }
        const PAD: usize = FRACTIONAL_TAPS;
        let mut padded = vec![0.0; src.len() + 2 * PAD];
        padded[PAD..PAD + src.len()].copy_from_slice(src);

        let shift = self.integer + offset;
        let m0 = HALF as i64 - 1;
        // output n reads x[n - shift - m] for m in -15..=16
        let first = (shift - (HALF as i64)).max(0);
        let last = (shift + src.len() as i64 + m0).min(dst.len() as i64 - 1);
        for n in first..=last {
            let base = n - shift;
            let mut acc = 0.0;
            for (t, &h) in self.taps.iter().enumerate() {
                let k = base - (t as i64 - m0);
                acc += h * padded[(k + PAD as i64) as usize];
            }
            dst[n as usize] += gain * acc;
        }
    }
}

/// Arrival delay in samples at each mic, relative to the array origin, for a
/// far-field source in the given direction.
pub fn plane_wave_delays(
    geometry: &ArrayGeometry,
    azimuth_deg: f64,
    elevation_deg: f64,
) -> Vec<f64> {
    let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
    // propagation runs from the source toward the array: u = -direction
    let dir = [el.cos() * az.cos(), el.cos() * az.sin()];
    let scale = geometry.sample_rate_hz() as f64 / geometry.speed_of_sound_mps();
    geometry
        .mics()
        .iter()
        .map(|p| -(dir[0] * p[0] + dir[1] * p[1]) * scale)
        .collect()
}

/// Exact frequency-domain delay of a finite signal (circular over a padded
/// length). Slow; used to check the FIR renderer.
pub fn fractional_delay_reference(src: &[f64], delay_samples: f64) -> Vec<f64> {
    let n = (src.len() + 2 * FRACTIONAL_TAPS + delay_samples.abs().ceil() as usize)
        .next_power_of_two()
        * 2;
    let mut buf: Vec<Complex<f64>> = src.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(n, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let f = if k <= n / 2 {
            k as f64
        } else {
            k as f64 - n as f64
        };
        let ph = if k == n / 2 {
            // Nyquist bin must stay real
            Complex::new((PI * delay_samples).cos(), 0.0)
        } else {
            Complex::from_polar(1.0, -2.0 * PI * f * delay_samples / n as f64)
        };
        *c *= ph;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter()
        .take(src.len())
        .map(|c| c.re / n as f64)
        .collect()
}
