use std::io::Write;

use crate::diarize::{Diarizer, GateDecision, SegmentEvent, SpeechGate};
use crate::error::{Error, Result};
use crate::fusion::{candidates_from, AngleCandidate, AngleEstimate, EstimatorMode, Fusion};
use crate::geometry::{ArrayGeometry, MicPair};
use crate::simulate::GroundTruth;
use crate::spectral::{DelayEstimate, DelayEstimator, FrameBlock};

use super::config::SessionConfig;
use super::events::{Command, EngineEvent, EventKind};

/// Supplies transcript text for a finished segment, e.g. from an external
/// recognizer or from simulator ground truth.
pub trait TextHook: Send {
    fn text_for(&mut self, start_s: f64, end_s: f64) -> Option<String>;
}

impl TextHook for GroundTruth {
    fn text_for(&mut self, start_s: f64, end_s: f64) -> Option<String> {
        GroundTruth::text_for(self, start_s, end_s)
    }
}

/// Everything the engine derived from one block.
#[derive(Debug, Clone)]
pub struct BlockOutput {
    pub block_index: u64,
    pub events: Vec<EngineEvent>,
    pub delays: Vec<DelayEstimate>,
    /// Candidates that went into the direction buffer, in push order.
    pub accepted: Vec<AngleCandidate>,
    /// Direction estimated from this block's candidates alone.
    pub block_azimuth: Option<f64>,
    /// Running estimate over the whole buffer after this block.
    pub estimate: Option<AngleEstimate>,
    pub gate: GateDecision,
    /// Running-histogram speaker label after this block.
    pub label: Option<usize>,
}

/// Streaming localization and diarization session.
///
/// Per block: pair delays, mirror candidates, buffer fusion, speech gate,
/// labeling, events. Commands queued with [`Engine::queue_command`] take
/// effect at the start of the next block.
pub struct Engine {
    cfg: SessionConfig,
    geometry: ArrayGeometry,
    pairs: Vec<MicPair>,
    estimator: DelayEstimator,
    fusion: Fusion,
    gate: SpeechGate,
    diarizer: Diarizer,
    block_duration_s: f64,
    next_block: u64,
    pending: Vec<Command>,
    text_hook: Option<Box<dyn TextHook>>,
    finished: bool,
}

impl Engine {
    pub fn new(cfg: SessionConfig) -> Result<Self> {
        cfg.validate()?;
        let geometry = cfg.array()?;
        let pairs: Vec<MicPair> = geometry
            .pairs()
            .into_iter()
            .filter(|p| p.max_delay_samples >= cfg.min_pair_delay_samples)
            .collect();
        let block_duration_s = cfg.block_duration_s()?;
        let mode = cfg.estimator.resolve(&geometry);
        Ok(Self {
            estimator: DelayEstimator::new(cfg.delay, cfg.frame_len)?,
            fusion: Fusion::new(
                mode,
                cfg.buffer_capacity,
                cfg.bandwidth_deg,
                cfg.bin_width_deg,
            ),
            gate: SpeechGate::new(cfg.gate, block_duration_s),
            diarizer: Diarizer::new(cfg.diarizer.clone(), block_duration_s, cfg.filter.clone())?,
            geometry,
            pairs,
            block_duration_s,
            next_block: 0,
            pending: Vec::new(),
            text_hook: None,
            finished: false,
            cfg,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    /// Pairs actually used for localization.
    pub fn pairs(&self) -> &[MicPair] {
        &self.pairs
    }

    pub fn block_duration_s(&self) -> f64 {
        self.block_duration_s
    }

    pub fn blocks_processed(&self) -> u64 {
        self.next_block
    }

    pub fn estimator_mode(&self) -> EstimatorMode {
        self.fusion.mode()
    }

    pub fn running_estimate(&self) -> Option<AngleEstimate> {
        self.fusion.estimate()
    }

    pub fn set_text_hook(&mut self, hook: Box<dyn TextHook>) {
        self.text_hook = Some(hook);
    }

    pub fn queue_command(&mut self, cmd: Command) {
        self.pending.push(cmd);
    }

    fn apply_commands(&mut self, time_s: f64, events: &mut Vec<EngineEvent>) {
        for cmd in std::mem::take(&mut self.pending) {
            match cmd {
                Command::SetFilter(f) => self.diarizer.set_filter(f),
                Command::ToggleSuppress(s) => {
                    let mut f = self.diarizer.filter().clone();
                    f.toggle(s);
                    self.diarizer.set_filter(f);
                }
                Command::SetEstimator(mode) => match mode.resolve(&self.geometry) {
                    EstimatorMode::Kde if !self.geometry.supports_full_circle() => {
                        events.push(EngineEvent::new(
                            time_s,
                            EventKind::Error {
                                message: "KDE needs three non-collinear mics".into(),
                            },
                        ));
                        continue;
                    }
                    m => self.fusion.set_mode(m),
                },
            }
            events.push(EngineEvent::new(
                time_s,
                EventKind::FilterAck {
                    filter: self.diarizer.filter().clone(),
                    estimator: self.fusion.mode(),
                },
            ));
        }
    }

    fn check_block(&self, block: &FrameBlock) -> Result<()> {
        if block.n_channels() != self.geometry.n_mics() {
            return Err(Error::MalformedBlock(format!(
                "block has {} channels, geometry has {} mics",
                block.n_channels(),
                self.geometry.n_mics()
            )));
        }
        if block.frame_len() != self.cfg.frame_len {
            return Err(Error::MalformedBlock(format!(
                "block has {} samples per channel, session expects {}",
                block.frame_len(),
                self.cfg.frame_len
            )));
        }
        Ok(())
    }

    pub fn process_block(&mut self, block: &FrameBlock) -> Result<BlockOutput> {
        if self.finished {
            return Err(Error::InvalidConfig("session already finished".into()));
        }
        self.check_block(block)?;
        let index = self.next_block;
        self.next_block += 1;
        let start_s = index as f64 * self.block_duration_s;
        let end_s = start_s + self.block_duration_s;

        let mut events = Vec::new();
        self.apply_commands(start_s, &mut events);

        let delays = self.estimator.estimate_block(block, &self.pairs)?;
        let gate = self.gate.update(block);
        let candidates = candidates_from(&delays, index);
        let valid_pairs = delays.iter().filter(|d| d.valid).count();

        let speechy = gate.active || gate.raw;
        let accepted = if !self.cfg.gate_fusion || speechy {
            candidates
        } else {
            Vec::new()
        };
        for c in &accepted {
            self.fusion.push(*c);
        }
        let block_azimuth = if valid_pairs >= self.cfg.block_min_pairs.max(1) {
            let az: Vec<f64> = accepted.iter().map(|c| c.azimuth_deg).collect();
            self.fusion.estimate_set(&az).map(|e| e.azimuth_deg)
        } else {
            None
        };
        let estimate = self.fusion.estimate();

        if index == 0 || gate.changed {
            events.push(EngineEvent::new(
                end_s,
                EventKind::Gate {
                    active: gate.active,
                },
            ));
        }
        if let Some(e) = estimate {
            if index % self.cfg.emit_every_blocks as u64 == 0 {
                events.push(EngineEvent::new(
                    end_s,
                    EventKind::Angle {
                        azimuth_deg: e.azimuth_deg,
                        confidence: e.confidence,
                        n_candidates: e.n_candidates,
                    },
                ));
            }
        }
        let seg_events = self.diarizer.process(index, gate, block_azimuth);
        self.push_segment_events(end_s, seg_events, &mut events);

        Ok(BlockOutput {
            block_index: index,
            events,
            delays,
            accepted,
            block_azimuth,
            estimate,
            gate,
            label: self.diarizer.last_label(),
        })
    }

    fn push_segment_events(
        &mut self,
        time_s: f64,
        seg_events: Vec<SegmentEvent>,
        out: &mut Vec<EngineEvent>,
    ) {
        for e in seg_events {
            let kind = match e {
                SegmentEvent::Open { id, start_s } => EventKind::SegmentOpen { id, start_s },
                SegmentEvent::Update {
                    id,
                    speaker_label,
                    azimuth_deg,
                    suppressed,
                } => EventKind::SegmentUpdate {
                    id,
                    speaker: speaker_label,
                    azimuth_deg,
                    suppressed,
                },
                SegmentEvent::Close { id, mut segment } => {
                    if let Some(hook) = self.text_hook.as_mut() {
                        segment.text = hook.text_for(segment.start_s, segment.end_s);
                    }
                    EventKind::SegmentClose { id, segment }
                }
            };
            out.push(EngineEvent::new(time_s, kind));
        }
    }

    /// Ends the session, closing any open segment.
    pub fn finish(&mut self) -> Vec<EngineEvent> {
        if self.finished {
            return Vec::new();
        }
        self.finished = true;
        let time_s = self.next_block as f64 * self.block_duration_s;
        let mut events = Vec::new();
        self.apply_commands(time_s, &mut events);
        let seg_events = self.diarizer.finish();
        self.push_segment_events(time_s, seg_events, &mut events);
        events
    }
}

/// Summary of a finished stream.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StreamSummary {
    pub blocks: u64,
    pub events: u64,
    pub final_estimate: Option<AngleEstimate>,
}

/// Runs a whole block source through a fresh engine, handing each event to
/// `sink` in order.
pub fn run_stream<I, F>(engine: &mut Engine, blocks: I, mut sink: F) -> Result<StreamSummary>
where
    I: IntoIterator<Item = Result<FrameBlock>>,
    F: FnMut(&EngineEvent) -> Result<()>,
{
    let mut summary = StreamSummary::default();
    for block in blocks {
        let out = engine.process_block(&block?)?;
        summary.blocks += 1;
        for e in &out.events {
            sink(e)?;
            summary.events += 1;
        }
    }
    for e in engine.finish() {
        sink(&e)?;
        summary.events += 1;
    }
    summary.final_estimate = engine.running_estimate();
    Ok(summary)
}

/// Runs a stream and writes the event log as JSON lines.
pub fn write_event_log<I, W>(engine: &mut Engine, blocks: I, mut out: W) -> Result<StreamSummary>
where
    I: IntoIterator<Item = Result<FrameBlock>>,
    W: Write,
{
    let summary = run_stream(engine, blocks, |e| {
        out.write_all(e.to_json_line().as_bytes())?;
        Ok(())
    })?;
    out.flush()?;
    Ok(summary)
}

/// Collects the closed segments of an event stream.
pub fn closed_segments(events: &[EngineEvent]) -> Vec<crate::diarize::SpeakerSegment> {
    events
        .iter()
        .filter_map(|e| match &e.kind {
            EventKind::SegmentClose { segment, .. } => Some(segment.clone()),
            _ => None,
        })
        .collect()
}
