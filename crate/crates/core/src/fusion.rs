//! Fusion of mirrored per-pair angle candidates into one global azimuth.
//!
//! Every valid pair delay yields two candidates, the true direction and its
//! reflection about the pair axis. Reflections from differently oriented
//! pairs scatter while true directions stack, so the highest point of a
//! circular density over recent candidates picks out the source.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::angle::{circular_mean, normalize_deg, wrapped_diff, wrapped_distance};
use crate::error::{Error, Result};
use crate::geometry::{local_to_global, ArrayGeometry};
use crate::spectral::DelayEstimate;

pub const DEFAULT_BUFFER_CAPACITY: usize = 600;
pub const DEFAULT_BANDWIDTH_DEG: f64 = 25.0;
pub const DEFAULT_BIN_WIDTH_DEG: f64 = 10.0;
/// Density grid resolution.
pub const GRID_POINTS: usize = 360;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleCandidate {
    pub azimuth_deg: f64,
    /// `(index_a, index_b)` of the pair that produced the candidate.
    pub pair: (usize, usize),
    pub block_index: u64,
}

/// A fused direction. `confidence` is the peak height divided by the number
/// of buffered candidates, so 1.0 means every candidate agrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleEstimate {
    pub azimuth_deg: f64,
    pub confidence: f64,
    pub n_candidates: usize,
}

/// Which peak finder turns candidates into an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorMode {
    Kde,
    Histogram,
    /// Histogram for arrays without full-circle support, KDE otherwise.
    #[default]
    Auto,
}

impl EstimatorMode {
    pub fn resolve(self, geometry: &ArrayGeometry) -> EstimatorMode {
        match self {
            EstimatorMode::Auto if geometry.supports_full_circle() => EstimatorMode::Kde,
            EstimatorMode::Auto => EstimatorMode::Histogram,
            m => m,
        }
    }
}

impl std::str::FromStr for EstimatorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kde" => Ok(Self::Kde),
            "histogram" => Ok(Self::Histogram),
            "auto" => Ok(Self::Auto),
            other => Err(Error::InvalidConfig(format!(
                "unknown estimator {other:?} (expected kde, histogram, or auto)"
            ))),
        }
    }
}

/// Fixed-capacity FIFO of the most recent candidates.
#[derive(Debug, Clone)]
pub struct CandidateBuffer {
    capacity: usize,
    items: VecDeque<AngleCandidate>,
}

impl CandidateBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "buffer capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Appends a candidate and returns the one evicted to make room, if any.
    pub fn push(&mut self, c: AngleCandidate) -> Option<AngleCandidate> {
        let evicted = if self.items.len() == self.capacity {
            self.items.pop_front()
        } else {
            None
        };
        self.items.push_back(c);
        evicted
    }

    pub fn clear(&mut self) {
        self.items.clear();
    }

    /// Oldest first.
    pub fn iter(&self) -> impl ExactSizeIterator<Item = &AngleCandidate> + '_ {
        self.items.iter()
    }

    pub fn azimuths(&self) -> impl Iterator<Item = f64> + Clone + '_ {
        self.items.iter().map(|c| c.azimuth_deg)
    }
}

/// The two mirror candidates of every valid estimate, in estimate order.
pub fn candidates_from(estimates: &[DelayEstimate], block_index: u64) -> Vec<AngleCandidate> {
    let mut out = Vec::with_capacity(2 * estimates.len());
    for e in estimates {
        if let Some(local) = e.local_angle_deg() {
            let (a, b) = local_to_global(&e.pair, local);
            for azimuth_deg in [a, b] {
                out.push(AngleCandidate {
                    azimuth_deg,
                    pair: (e.pair.index_a, e.pair.index_b),
                    block_index,
                });
            }
        }
    }
    out
}

/// Pushes the candidates of one block into the buffer. Invalid estimates
/// contribute nothing. Returns the evicted candidates.
pub fn push_candidates(
    buffer: &mut CandidateBuffer,
    estimates: &[DelayEstimate],
    block_index: u64,
) -> Vec<AngleCandidate> {
    candidates_from(estimates, block_index)
        .into_iter()
        .filter_map(|c| buffer.push(c))
        .collect()
}

fn gaussian(d: f64, bandwidth: f64) -> f64 {
    (-0.5 * (d / bandwidth).powi(2)).exp()
}

/// Wrapped Gaussian KDE over the buffer, evaluated on a 1° grid. The kernel
/// is unnormalized (height 1 at its center) and uses circular distance, so
/// 359° and 1° are 2° apart.
pub fn wrapped_kde_peak(buffer: &CandidateBuffer, bandwidth_deg: f64) -> Option<AngleEstimate> {
    kde_peak_of(buffer.azimuths(), buffer.len(), bandwidth_deg)
}

fn kde_peak_of(
    azimuths: impl Iterator<Item = f64> + Clone,
    n: usize,
    bandwidth_deg: f64,
) -> Option<AngleEstimate> {
    if n == 0 {
        return None;
    }
    let mut density = [0.0; GRID_POINTS];
    for (g, d) in density.iter_mut().enumerate() {
        *d = azimuths
            .clone()
            .map(|a| gaussian(wrapped_distance(g as f64, a), bandwidth_deg))
            .sum();
    }
    Some(grid_peak(&density, n))
}

fn grid_peak(density: &[f64; GRID_POINTS], n: usize) -> AngleEstimate {
    let (idx, &peak) = density
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |best, cur| {
            if cur.1 > best.1 {
                cur
            } else {
                best
            }
        });
    AngleEstimate {
        azimuth_deg: idx as f64,
        confidence: (peak / n as f64).clamp(0.0, 1.0),
        n_candidates: n,
    }
}

/// Running KDE grid updated by adding and removing single kernels, so each
/// candidate costs one grid pass instead of re-evaluating the whole buffer.
#[derive(Debug, Clone)]
pub struct KdeGrid {
    bandwidth_deg: f64,
    density: [f64; GRID_POINTS],
    edits_since_rebuild: usize,
}

impl KdeGrid {
    pub fn new(bandwidth_deg: f64) -> Self {
        assert!(bandwidth_deg > 0.0, "bandwidth must be positive");
        Self {
            bandwidth_deg,
            density: [0.0; GRID_POINTS],
            edits_since_rebuild: 0,
        }
    }

    pub fn bandwidth_deg(&self) -> f64 {
        self.bandwidth_deg
    }

    pub fn add(&mut self, azimuth_deg: f64) {
        accumulate_kernel(&mut self.density, azimuth_deg, self.bandwidth_deg, 1.0);
        self.edits_since_rebuild += 1;
    }

    pub fn remove(&mut self, azimuth_deg: f64) {
        accumulate_kernel(&mut self.density, azimuth_deg, self.bandwidth_deg, -1.0);
        self.edits_since_rebuild += 1;
    }

    /// Recomputes the grid from scratch, discarding accumulated rounding.
    pub fn rebuild<I: IntoIterator<Item = f64>>(&mut self, azimuths: I) {
        self.density = [0.0; GRID_POINTS];
        for a in azimuths {
            accumulate_kernel(&mut self.density, a, self.bandwidth_deg, 1.0);
        }
        self.edits_since_rebuild = 0;
    }

    pub fn edits_since_rebuild(&self) -> usize {
        self.edits_since_rebuild
    }

    pub fn density(&self) -> &[f64; GRID_POINTS] {
        &self.density
    }

    pub fn peak(&self, n: usize) -> Option<AngleEstimate> {
        (n > 0).then(|| grid_peak(&self.density, n))
    }
}

/// Adds `weight * exp(-d^2 / 2h^2)` to every grid point, `d` being the
/// circular distance to `azimuth`. Walks outward from the nearest grid point
/// using the Gaussian's ratio recurrence: two multiplies per point, no exp.
fn accumulate_kernel(density: &mut [f64; GRID_POINTS], azimuth: f64, bandwidth: f64, weight: f64) {
    let azimuth = normalize_deg(azimuth);
    let base = azimuth.floor();
    let frac = azimuth - base;
    let base = base as usize % GRID_POINTS;
    let inv2h2 = 0.5 / (bandwidth * bandwidth);
    let q = (-2.0 * inv2h2).exp();

    // j = 0 sits at distance -frac from the azimuth
    let d0 = -frac;
    let e0 = (-d0 * d0 * inv2h2).exp();
    density[base] += weight * e0;

    // forward: d_{j+1} = d_j + 1, e_{j+1} = e_j * exp(-(2 d_j + 1) / 2h^2)
    let (mut e, mut r) = (e0, (-(2.0 * d0 + 1.0) * inv2h2).exp());
    for j in 1..=GRID_POINTS / 2 {
        e *= r;
        r *= q;
        density[(base + j) % GRID_POINTS] += weight * e;
    }
    // backward: d_{j-1} = d_j - 1, e_{j-1} = e_j * exp((2 d_j - 1) / 2h^2)
    let (mut e, mut r) = (e0, ((2.0 * d0 - 1.0) * inv2h2).exp());
    for j in 1..GRID_POINTS / 2 {
        e *= r;
        r *= q;
        density[(base + GRID_POINTS - j) % GRID_POINTS] += weight * e;
    }
}

/// Mode of a wrapped histogram. Returns `(azimuth, count in mode bin)`.
///
/// Bins are `[k w, (k + 1) w)`. Ties go to the bin holding the most recent
/// sample (the input is oldest first). The reported azimuth is the circular
/// mean of the samples within one bin width of the mode bin's center, which
/// keeps it from snapping to bin centers.
pub fn wrapped_histogram_mode(angles: &[f64], bin_width_deg: f64) -> Option<(f64, usize)> {
    if angles.is_empty() {
        return None;
    }
    let n_bins = ((360.0 / bin_width_deg).round() as usize).max(1);
    let width = 360.0 / n_bins as f64;
    let mut counts = vec![0usize; n_bins];
    let mut latest = vec![0usize; n_bins];
    for (i, &a) in angles.iter().enumerate() {
        let b = ((normalize_deg(a) / width) as usize).min(n_bins - 1);
        counts[b] += 1;
        latest[b] = i;
    }
    let mode = (0..n_bins)
        .filter(|&b| counts[b] > 0)
        .max_by(|&x, &y| counts[x].cmp(&counts[y]).then(latest[x].cmp(&latest[y])))?;
    let center = (mode as f64 + 0.5) * width;
    let azimuth = circular_mean(
        angles
            .iter()
            .copied()
            .filter(|&a| wrapped_distance(a, center) <= width),
    )
    .unwrap_or(center);
    Some((azimuth, counts[mode]))
}

/// Histogram-mode estimate. Confidence is the mode count over the buffer size.
pub fn histogram_peak(buffer: &CandidateBuffer, bin_width_deg: f64) -> Option<AngleEstimate> {
    let angles: Vec<f64> = buffer.azimuths().collect();
    let (azimuth_deg, count) = wrapped_histogram_mode(&angles, bin_width_deg)?;
    Some(AngleEstimate {
        azimuth_deg,
        confidence: count as f64 / angles.len() as f64,
        n_candidates: angles.len(),
    })
}

/// Buffer plus the resolved estimator, keeping the KDE grid in step with
/// pushes and evictions.
#[derive(Debug, Clone)]
pub struct Fusion {
    mode: EstimatorMode,
    bandwidth_deg: f64,
    bin_width_deg: f64,
    buffer: CandidateBuffer,
    grid: KdeGrid,
}

impl Fusion {
    pub fn new(
        mode: EstimatorMode,
        capacity: usize,
        bandwidth_deg: f64,
        bin_width_deg: f64,
    ) -> Self {
        assert!(
            mode != EstimatorMode::Auto,
            "resolve the estimator against a geometry first"
        );
        Self {
            mode,
            bandwidth_deg,
            bin_width_deg,
            buffer: CandidateBuffer::new(capacity),
            grid: KdeGrid::new(bandwidth_deg),
        }
    }

    pub fn mode(&self) -> EstimatorMode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: EstimatorMode) {
        assert!(mode != EstimatorMode::Auto);
        if mode == EstimatorMode::Kde && self.mode != EstimatorMode::Kde {
            self.grid.rebuild(self.buffer.azimuths());
        }
        self.mode = mode;
    }

    pub fn buffer(&self) -> &CandidateBuffer {
        &self.buffer
    }

    pub fn push(&mut self, c: AngleCandidate) {
        let evicted = self.buffer.push(c);
        if self.mode == EstimatorMode::Kde {
            self.grid.add(c.azimuth_deg);
            if let Some(old) = evicted {
                self.grid.remove(old.azimuth_deg);
            }
            if self.grid.edits_since_rebuild() >= 4 * self.buffer.capacity() {
                self.grid.rebuild(self.buffer.azimuths());
            }
        }
    }

    pub fn estimate(&self) -> Option<AngleEstimate> {
        match self.mode {
            EstimatorMode::Kde => self.grid.peak(self.buffer.len()),
            EstimatorMode::Histogram => histogram_peak(&self.buffer, self.bin_width_deg),
            EstimatorMode::Auto => unreachable!(),
        }
    }

    /// One-shot estimate of a small candidate set with this fusion's
    /// estimator, without touching the running buffer.
    pub fn estimate_set(&self, azimuths: &[f64]) -> Option<AngleEstimate> {
        match self.mode {
            EstimatorMode::Kde => {
                let mut grid = KdeGrid::new(self.bandwidth_deg);
                grid.rebuild(azimuths.iter().copied());
                grid.peak(azimuths.len())
            }
            EstimatorMode::Histogram => {
                let (azimuth_deg, count) = wrapped_histogram_mode(azimuths, self.bin_width_deg)?;
                Some(AngleEstimate {
                    azimuth_deg,
                    confidence: count as f64 / azimuths.len() as f64,
                    n_candidates: azimuths.len(),
                })
            }
            EstimatorMode::Auto => unreachable!(),
        }
    }
}

/// Signed error helper used by the evaluators.
pub fn azimuth_error(estimate: f64, truth: f64) -> f64 {
    wrapped_diff(estimate, truth).abs()
}
