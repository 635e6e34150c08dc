//! Wire types of the line-delimited JSON protocol.
//!
//! Every engine event is one JSON object per line carrying the protocol
//! version `v`, a `kind`, and a monotonic `time_s`. Clients send commands as
//! single-key objects, e.g. `{"set_filter": [[225, 315]]}`,
//! `{"toggle_suppress": [315, 45]}`, `{"set_estimator": "histogram"}`.

use serde::{Deserialize, Serialize};

use crate::diarize::{Sector, SectorFilter, SpeakerSegment};
use crate::error::{Error, Result};
use crate::fusion::EstimatorMode;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineEvent {
    pub v: u32,
    pub time_s: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Angle {
        azimuth_deg: f64,
        confidence: f64,
        n_candidates: usize,
    },
    Gate {
        active: bool,
    },
    SegmentOpen {
        id: u64,
        start_s: f64,
    },
    SegmentUpdate {
        id: u64,
        speaker: Option<usize>,
        azimuth_deg: Option<f64>,
        suppressed: bool,
    },
    SegmentClose {
        id: u64,
        #[serde(flatten)]
        segment: SpeakerSegment,
    },
    FilterAck {
        filter: SectorFilter,
        estimator: EstimatorMode,
    },
    Error {
        message: String,
    },
}

impl EngineEvent {
    pub fn new(time_s: f64, kind: EventKind) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            time_s,
            kind,
        }
    }

    pub fn to_json_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("events always serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    SetFilter(SectorFilter),
    ToggleSuppress(Sector),
    SetEstimator(EstimatorMode),
}

impl Command {
    /// Parses one command line. A `v` field, if present, must match the
    /// protocol version.
    pub fn parse(line: &str) -> Result<Self> {
        let mut value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| Error::InvalidCommand(e.to_string()))?;
        if let Some(obj) = value.as_object_mut() {
            if let Some(v) = obj.remove("v") {
                if v.as_u64() != Some(PROTOCOL_VERSION as u64) {
                    return Err(Error::InvalidCommand(format!(
                        "unsupported protocol version {v}"
                    )));
                }
            }
        }
        serde_json::from_value(value).map_err(|e| Error::InvalidCommand(e.to_string()))
    }
}
