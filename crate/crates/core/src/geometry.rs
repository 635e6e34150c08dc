//! Microphone array layouts, pair enumeration, and pair-frame to global
//! azimuth transforms.
//!
//! Global azimuth convention, used everywhere in the crate: 0° points to the
//! device's right (+x), 90° to its top (+y), counter-clockwise positive.

use serde::{Deserialize, Serialize};

use crate::angle::normalize_deg;
use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 44_100;
pub const DEFAULT_SPEED_OF_SOUND_MPS: f64 = 343.0;

/// Long side of the phone-case rectangle.
pub const RECT_LONG_SIDE_M: f64 = 0.080;
/// Short side of the phone-case rectangle. Not a measured value; it is
/// chosen to fit a phone case and can be overridden in config.
pub const RECT_SHORT_SIDE_M: f64 = 0.040;

/// Positions of a planar microphone array plus the acoustic constants needed
/// to turn pair baselines into delay bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometryConfig", into = "GeometryConfig")]
pub struct ArrayGeometry {
    mics: Vec<[f64; 2]>,
    sample_rate_hz: u32,
    speed_of_sound_mps: f64,
}

impl ArrayGeometry {
    pub fn new(mics: Vec<[f64; 2]>, sample_rate_hz: u32, speed_of_sound_mps: f64) -> Result<Self> {
        if mics.len() < 2 {
            return Err(Error::InvalidGeometry(format!(
                "need at least 2 microphones, got {}",
                mics.len()
            )));
        }
        if sample_rate_hz == 0 {
            return Err(Error::InvalidGeometry(
                "sample rate must be positive".into(),
            ));
        }
        if !(speed_of_sound_mps.is_finite() && speed_of_sound_mps > 0.0) {
            return Err(Error::InvalidGeometry(
                "speed of sound must be positive".into(),
            ));
        }
        for (i, p) in mics.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite()) {
                return Err(Error::InvalidGeometry(format!(
                    "mic {i} has a non-finite position"
                )));
            }
            for (j, q) in mics.iter().enumerate().skip(i + 1) {
                if (p[0] - q[0]).hypot(p[1] - q[1]) < 1e-6 {
                    return Err(Error::InvalidGeometry(format!("mics {i} and {j} coincide")));
                }
            }
        }
        Ok(Self {
            mics,
            sample_rate_hz,
            speed_of_sound_mps,
        })
    }

    /// Four microphones on the corners of a rectangle, long side along x.
    /// Mic order runs counter-clockwise from the bottom-left corner.
    pub fn rectangle(long_side_m: f64, short_side_m: f64) -> Result<Self> {
        let (hx, hy) = (long_side_m / 2.0, short_side_m / 2.0);
        Self::new(
            vec![[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]],
            DEFAULT_SAMPLE_RATE_HZ,
            DEFAULT_SPEED_OF_SOUND_MPS,
        )
    }

    /// The four-microphone phone-case layout.
    pub fn rect4() -> Self {
        Self::rectangle(RECT_LONG_SIDE_M, RECT_SHORT_SIDE_M).expect("preset is valid")
    }

    /// The phone-case layout with its fourth microphone removed. The three
    /// remaining mics are the first three channels of [`Self::rect4`].
    pub fn rect3() -> Self {
        Self::rect4().subset(&[0, 1, 2]).expect("preset is valid")
    }

    /// Pixel-6-like handset: bottom mic, rear-camera mic, and top mic, all
    /// on the device's long axis. The top pair is 15 mm apart. Collinear, so
    /// only 180° localization is possible.
    pub fn phone3() -> Self {
        Self::new(
            vec![[0.0, -0.075], [0.0, 0.060], [0.0, 0.075]],
            DEFAULT_SAMPLE_RATE_HZ,
            DEFAULT_SPEED_OF_SOUND_MPS,
        )
        .expect("preset is valid")
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "rect4" => Ok(Self::rect4()),
            "rect3" => Ok(Self::rect3()),
            "phone3" => Ok(Self::phone3()),
            other => Err(Error::InvalidGeometry(format!(
                "unknown preset {other:?} (expected rect4, rect3, or phone3)"
            ))),
        }
    }

    /// A new geometry made of the given mic indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mics = indices
            .iter()
            .map(|&i| {
                self.mics
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::InvalidGeometry(format!("no mic {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(mics, self.sample_rate_hz, self.speed_of_sound_mps)
    }

    pub fn with_sample_rate(mut self, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::InvalidGeometry(
                "sample rate must be positive".into(),
            ));
        }
        self.sample_rate_hz = sample_rate_hz;
        Ok(self)
    }

    pub fn mics(&self) -> &[[f64; 2]] {
        &self.mics
    }

    pub fn n_mics(&self) -> usize {
        self.mics.len()
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn speed_of_sound_mps(&self) -> f64 {
        self.speed_of_sound_mps
    }

    /// Whether the array spans a plane (three or more non-collinear mics),
    /// which is what resolves the front-back ambiguity of a single pair.
    pub fn supports_full_circle(&self) -> bool {
        let m = &self.mics;
        for i in 0..m.len() {
            for j in i + 1..m.len() {
                for k in j + 1..m.len() {
                    let u = [m[j][0] - m[i][0], m[j][1] - m[i][1]];
                    let v = [m[k][0] - m[i][0], m[k][1] - m[i][1]];
                    let cross = u[0] * v[1] - u[1] * v[0];
                    let norm = u[0].hypot(u[1]) * v[0].hypot(v[1]);
                    if cross.abs() > 1e-6 * norm {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Axis of a collinear array (direction from the first to the last mic
    /// along the line), or `None` for planar arrays.
    pub fn line_axis_deg(&self) -> Option<f64> {
        if self.supports_full_circle() {
            return None;
        }
        let (first, last) = self.extreme_pair();
        let (a, b) = (self.mics[first], self.mics[last]);
        Some(normalize_deg((b[1] - a[1]).atan2(b[0] - a[0]).to_degrees()))
    }

    fn extreme_pair(&self) -> (usize, usize) {
        let mut best = (0, 1, 0.0);
        for i in 0..self.mics.len() {
            for j in i + 1..self.mics.len() {
                let d = distance(self.mics[i], self.mics[j]);
                if d > best.2 {
                    best = (i, j, d);
                }
            }
        }
        (best.0, best.1)
    }

    pub fn pairs(&self) -> Vec<MicPair> {
        enumerate_pairs(self)
    }

    pub fn to_config(&self) -> GeometryConfig {
        GeometryConfig {
            preset: None,
            mics: Some(self.mics.clone()),
            sample_rate_hz: Some(self.sample_rate_hz),
            speed_of_sound_mps: Some(self.speed_of_sound_mps),
            long_side_m: None,
            short_side_m: None,
        }
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// One unordered microphone pair with its derived delay bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicPair {
    pub index_a: usize,
    pub index_b: usize,
    /// Distance between the two mics.
    pub baseline_m: f64,
    /// Global azimuth of the direction pointing from mic b to mic a.
    pub axis_azimuth_deg: f64,
    /// Largest physically possible delay between the pair, in samples.
    pub max_delay_samples: f64,
}

impl MicPair {
    fn new(geometry: &ArrayGeometry, index_a: usize, index_b: usize) -> Self {
        let a = geometry.mics[index_a];
        let b = geometry.mics[index_b];
        let baseline_m = distance(a, b);
        let axis_azimuth_deg = normalize_deg((a[1] - b[1]).atan2(a[0] - b[0]).to_degrees());
        let max_delay_samples =
            baseline_m / geometry.speed_of_sound_mps * geometry.sample_rate_hz as f64;
        Self {
            index_a,
            index_b,
            baseline_m,
            axis_azimuth_deg,
            max_delay_samples,
        }
    }

    /// Integer lag radius searched by the delay estimator.
    pub fn search_radius(&self) -> usize {
        self.max_delay_samples.ceil() as usize
    }

    /// The same pair with a and b exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            index_a: self.index_b,
            index_b: self.index_a,
            axis_azimuth_deg: normalize_deg(self.axis_azimuth_deg + 180.0),
            ..*self
        }
    }

    /// See [`local_to_global`].
    pub fn local_to_global(&self, local_angle_deg: f64) -> (f64, f64) {
        local_to_global(self, local_angle_deg)
    }
}

/// All `n(n-1)/2` unordered pairs, with `index_a < index_b`.
pub fn enumerate_pairs(geometry: &ArrayGeometry) -> Vec<MicPair> {
    let n = geometry.n_mics();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            pairs.push(MicPair::new(geometry, a, b));
        }
    }
    pairs
}

/// Converts an angle measured from a pair's axis into the two global azimuths
/// consistent with it. A single pair cannot tell which side of its axis the
/// source is on, so both mirror images are returned.
pub fn local_to_global(pair: &MicPair, local_angle_deg: f64) -> (f64, f64) {
    let local = local_angle_deg.clamp(0.0, 180.0);
    (
        normalize_deg(pair.axis_azimuth_deg + local),
        normalize_deg(pair.axis_azimuth_deg - local),
    )
}

/// The geometry block of scene and session config files.
///
/// Takes either a `preset` name or an explicit `mics` list; an empty block
/// means the `rect4` preset. The rectangle side lengths only apply to the
/// rect presets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mics: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_rate_hz: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_of_sound_mps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub long_side_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub short_side_m: Option<f64>,
}

impl GeometryConfig {
    pub fn preset(name: &str) -> Self {
        Self {
            preset: Some(name.to_string()),
            ..Default::default()
        }
    }
}

impl TryFrom<GeometryConfig> for ArrayGeometry {
    type Error = Error;

    fn try_from(cfg: GeometryConfig) -> Result<Self> {
        let fs = cfg.sample_rate_hz.unwrap_or(DEFAULT_SAMPLE_RATE_HZ);
        let c = cfg.speed_of_sound_mps.unwrap_or(DEFAULT_SPEED_OF_SOUND_MPS);
        let mics = match (cfg.preset.as_deref(), cfg.mics) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidGeometry(
                    "give either a preset or a mics list, not both".into(),
                ))
            }
            (None, Some(mics)) => mics,
            (Some(name @ ("rect4" | "rect3")), None) => {
                let rect = ArrayGeometry::rectangle(
                    cfg.long_side_m.unwrap_or(RECT_LONG_SIDE_M),
                    cfg.short_side_m.unwrap_or(RECT_SHORT_SIDE_M),
                )?;
                let keep: &[usize] = if name == "rect4" {
                    &[0, 1, 2, 3]
                } else {
                    &[0, 1, 2]
                };
                rect.subset(keep)?.mics
            }
            (Some(name), None) => ArrayGeometry::preset(name)?.mics,
            (None, None) => ArrayGeometry::rect4().mics,
        };
        ArrayGeometry::new(mics, fs, c)
    }
}

impl From<ArrayGeometry> for GeometryConfig {
    fn from(g: ArrayGeometry) -> Self {
        g.to_config()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angle::{circular_mean, wrapped_distance};
    use proptest::prelude::*;

    fn pair_with_axis(axis: f64) -> MicPair {
        MicPair {
            index_a: 0,
            index_b: 1,
            baseline_m: 0.08,
            axis_azimuth_deg: axis,
            max_delay_samples: 10.0,
        }
    }

    #[test]
    fn four_mic_rectangle_has_six_pairs() {
        assert_eq!(enumerate_pairs(&ArrayGeometry::rect4()).len(), 6);
    }

    #[test]
    fn two_mics_make_one_pair() {
        let g = ArrayGeometry::new(vec![[0.0, 0.0], [0.1, 0.0]], 44_100, 343.0).unwrap();
        assert_eq!(enumerate_pairs(&g).len(), 1);
    }

    #[test]
    fn eighty_mm_pair_max_delay() {
        let g = ArrayGeometry::new(vec![[0.0, 0.0], [0.080, 0.0]], 44_100, 343.0).unwrap();
        let p = enumerate_pairs(&g)[0];
        assert!(
            (p.max_delay_samples - 10.2857).abs() < 1e-3,
            "{}",
            p.max_delay_samples
        );
        assert_eq!(p.search_radius(), 11);
    }

    #[test]
    fn fewer_than_two_mics_is_rejected() {
        assert!(matches!(
            ArrayGeometry::new(vec![[0.0, 0.0]], 44_100, 343.0),
            Err(Error::InvalidGeometry(_))
        ));
        assert!(ArrayGeometry::new(vec![[0.0, 0.0], [0.0, 0.0]], 44_100, 343.0).is_err());
    }

    #[test]
    fn axis_points_from_b_to_a() {
        let g = ArrayGeometry::new(vec![[0.1, 0.0], [0.0, 0.0]], 44_100, 343.0).unwrap();
        assert!(wrapped_distance(g.pairs()[0].axis_azimuth_deg, 0.0) < 1e-12);
        let g = ArrayGeometry::new(vec![[0.0, 0.0], [0.0, 0.1]], 44_100, 343.0).unwrap();
        assert!(wrapped_distance(g.pairs()[0].axis_azimuth_deg, 270.0) < 1e-12);
    }

    #[test]
    fn local_to_global_examples() {
        assert_eq!(local_to_global(&pair_with_axis(0.0), 90.0), (90.0, 270.0));
        assert_eq!(local_to_global(&pair_with_axis(0.0), 0.0), (0.0, 0.0));
        let (a, b) = local_to_global(&pair_with_axis(45.0), 30.0);
        assert!((a - 75.0).abs() < 1e-12 && (b - 15.0).abs() < 1e-12);
    }

    #[test]
    fn presets_and_full_circle_support() {
        assert!(ArrayGeometry::rect4().supports_full_circle());
        assert!(ArrayGeometry::rect3().supports_full_circle());
        assert!(!ArrayGeometry::phone3().supports_full_circle());
        let axis = ArrayGeometry::phone3().line_axis_deg().unwrap();
        assert!(wrapped_distance(axis, 90.0) < 1e-9);
        let phone = ArrayGeometry::phone3();
        let top = phone
            .pairs()
            .into_iter()
            .find(|p| p.index_a == 1 && p.index_b == 2)
            .unwrap();
        assert!((top.baseline_m - 0.015).abs() < 1e-12);
    }

    #[test]
    fn config_round_trip_and_errors() {
        let cfg: GeometryConfig =
            toml::from_str("preset = \"rect4\"\nshort_side_m = 0.05").unwrap();
        let g = ArrayGeometry::try_from(cfg).unwrap();
        assert!((g.mics()[2][1] - 0.025).abs() < 1e-12);
        let explicit: ArrayGeometry =
            toml::from_str("mics = [[0.0, 0.0], [0.05, 0.0], [0.0, 0.05]]\nsample_rate_hz = 48000")
                .unwrap();
        assert_eq!(explicit.sample_rate_hz(), 48_000);
        assert_eq!(explicit.n_mics(), 3);
        let text = toml::to_string(&explicit).unwrap();
        let back: ArrayGeometry = toml::from_str(&text).unwrap();
        assert_eq!(back, explicit);
        assert!(toml::from_str::<ArrayGeometry>("preset = \"nope\"").is_err());
        assert!(toml::from_str::<ArrayGeometry>("sample_rate_hz = 0").is_err());
        assert_eq!(
            toml::from_str::<ArrayGeometry>("").unwrap(),
            ArrayGeometry::rect4()
        );
    }

    fn arb_geometry() -> impl Strategy<Value = ArrayGeometry> {
        prop::collection::vec((-0.2f64..0.2, -0.2f64..0.2), 2..=8).prop_filter_map(
            "mics must be distinct",
            |pts| {
                ArrayGeometry::new(
                    pts.into_iter().map(|(x, y)| [x, y]).collect(),
                    44_100,
                    343.0,
                )
                .ok()
            },
        )
    }

    proptest! {
        #[test]
        fn pair_count_is_n_choose_2(g in arb_geometry()) {
            let n = g.n_mics();
            prop_assert_eq!(enumerate_pairs(&g).len(), n * (n - 1) / 2);
        }

        #[test]
        fn candidates_mirror_about_axis(axis in 0.0f64..360.0, local in 0.0f64..=180.0) {
            let (a, b) = local_to_global(&pair_with_axis(axis), local);
            prop_assert!((0.0..360.0).contains(&a) && (0.0..360.0).contains(&b));
            // both candidates sit at the same distance from the axis line
            prop_assert!((wrapped_distance(a, axis) - wrapped_distance(b, axis)).abs() < 1e-9);
            if let Some(mean) = circular_mean([a, b]) {
                let off = wrapped_distance(mean, axis).min(wrapped_distance(mean, axis + 180.0));
                prop_assert!(off < 1e-6, "mean {} axis {}", mean, axis);
            }
        }

        #[test]
        fn max_delay_is_linear(base in 0.01f64..0.5, k in 1.0f64..4.0) {
            let g1 = ArrayGeometry::new(vec![[0.0, 0.0], [base, 0.0]], 16_000, 343.0).unwrap();
            let g2 = ArrayGeometry::new(vec![[0.0, 0.0], [base * k, 0.0]], 16_000, 343.0).unwrap();
            let g3 = g1.clone().with_sample_rate(32_000).unwrap();
            let d1 = g1.pairs()[0].max_delay_samples;
            prop_assert!((g2.pairs()[0].max_delay_samples - k * d1).abs() < 1e-9 * k * d1.max(1.0));
            prop_assert!((g3.pairs()[0].max_delay_samples - 2.0 * d1).abs() < 1e-9 * d1.max(1.0));
        }
    }
}
