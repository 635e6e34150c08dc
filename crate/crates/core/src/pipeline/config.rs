use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diarize::{DiarizerConfig, SectorFilter, SpeechGateConfig};
use crate::error::{Error, Result};
use crate::fusion::{
    EstimatorMode, DEFAULT_BANDWIDTH_DEG, DEFAULT_BIN_WIDTH_DEG, DEFAULT_BUFFER_CAPACITY,
};
use crate::geometry::{ArrayGeometry, GeometryConfig};
use crate::spectral::{DelayConfig, DEFAULT_FRAME_LEN};

/// Everything that configures one engine session. Loadable from TOML; every
/// field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub geometry: GeometryConfig,
    pub frame_len: usize,
    pub delay: DelayConfig,
    pub estimator: EstimatorMode,
    pub bandwidth_deg: f64,
    pub bin_width_deg: f64,
    pub buffer_capacity: usize,
    /// Pairs shorter than this many samples of maximum delay are skipped;
    /// their angle resolution is too coarse to help.
    pub min_pair_delay_samples: f64,
    /// Valid pairs a block needs before it gets its own azimuth for
    /// speaker labeling.
    pub block_min_pairs: usize,
    /// Only feed the direction buffer while the speech gate is open (or
    /// about to open).
    pub gate_fusion: bool,
    pub gate: SpeechGateConfig,
    pub diarizer: DiarizerConfig,
    /// Initial suppressed sectors.
    pub filter: SectorFilter,
    /// Emit an angle event every this many blocks.
    pub emit_every_blocks: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            geometry: GeometryConfig::preset("rect4"),
            frame_len: DEFAULT_FRAME_LEN,
            delay: DelayConfig::default(),
            estimator: EstimatorMode::Auto,
            bandwidth_deg: DEFAULT_BANDWIDTH_DEG,
            bin_width_deg: DEFAULT_BIN_WIDTH_DEG,
            buffer_capacity: DEFAULT_BUFFER_CAPACITY,
            min_pair_delay_samples: 2.5,
            block_min_pairs: 2,
            gate_fusion: true,
            gate: SpeechGateConfig::default(),
            diarizer: DiarizerConfig::default(),
            filter: SectorFilter::default(),
            emit_every_blocks: 1,
        }
    }
}

impl SessionConfig {
    pub fn with_geometry(geometry: GeometryConfig) -> Self {
        Self {
            geometry,
            ..Default::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SessionConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn array(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::try_from(self.geometry.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        let geometry = self.array()?;
        self.delay.validate()?;
        self.diarizer.validate()?;
        if self.frame_len < 16 {
            return bad("frame_len must be at least 16");
        }
        if !(self.bandwidth_deg > 0.0 && self.bandwidth_deg.is_finite()) {
            return bad("bandwidth_deg must be positive");
        }
        if !(self.bin_width_deg > 0.0 && self.bin_width_deg <= 180.0) {
            return bad("bin_width_deg must be in (0, 180]");
        }
        if self.buffer_capacity == 0 {
            return bad("buffer_capacity must be positive");
        }
        if self.emit_every_blocks == 0 {
            return bad("emit_every_blocks must be positive");
        }
        if self.gate.reference_channel >= geometry.n_mics() {
            return bad("gate reference channel is not a mic of the geometry");
        }
        if !(self.gate.margin >= 1.0) || !(self.gate.floor_time_constant_s > 0.0) {
            return bad("gate margin must be >= 1 and its time constant positive");
        }
        if geometry
            .pairs()
            .iter()
            .all(|p| p.max_delay_samples < self.min_pair_delay_samples)
        {
            return bad("no mic pair is long enough for min_pair_delay_samples");
        }
        if self.estimator.resolve(&geometry) == EstimatorMode::Kde
            && !geometry.supports_full_circle()
        {
            return bad("KDE needs three non-collinear mics; use histogram or auto");
        }
        Ok(())
    }

    pub fn block_duration_s(&self) -> Result<f64> {
        Ok(self.frame_len as f64 / self.array()?.sample_rate_hz() as f64)
    }
}
