//! Speech gating, direction-based speaker labeling, utterance segmentation,
//! and direction-sector suppression.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::angle::{in_wrapped_interval, normalize_deg, wrapped_distance};
use crate::error::{Error, Result};
use crate::fusion::{wrapped_histogram_mode, AngleEstimate};
use crate::spectral::FrameBlock;

/// Energy gate with an adaptive noise floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeechGateConfig {
    /// Required ratio of block energy (mean square) to the noise floor.
    pub margin: f64,
    /// Rise time constant of the minimum-tracking noise floor.
    pub floor_time_constant_s: f64,
    /// Consecutive blocks that must disagree with the current state before
    /// it toggles.
    pub hysteresis_blocks: usize,
    /// Absolute RMS below which a block is never speech.
    pub min_rms: f64,
    /// Channel whose level drives the gate.
    pub reference_channel: usize,
}

impl Default for SpeechGateConfig {
    fn default() -> Self {
        Self {
            margin: 4.0,
            floor_time_constant_s: 1.0,
            hysteresis_blocks: 3,
            min_rms: 1e-4,
            reference_channel: 0,
        }
    }
}

/// Gate output for one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateDecision {
    /// Debounced state after this block.
    pub active: bool,
    /// Undebounced decision for this block alone.
    pub raw: bool,
    /// The state toggled on this block.
    pub changed: bool,
    /// First block of the run that put the gate in its current state. On a
    /// toggle this lies `hysteresis_blocks - 1` blocks back.
    pub since_block: u64,
}

#[derive(Debug, Clone)]
pub struct SpeechGate {
    cfg: SpeechGateConfig,
    alpha: f64,
    floor: Option<f64>,
    active: bool,
    run: usize,
    run_start: u64,
    since_block: u64,
    block: u64,
}

impl SpeechGate {
    pub fn new(cfg: SpeechGateConfig, block_duration_s: f64) -> Self {
        let alpha = 1.0 - (-block_duration_s / cfg.floor_time_constant_s.max(1e-9)).exp();
        Self {
            cfg,
            alpha,
            floor: None,
            active: false,
            run: 0,
            run_start: 0,
            since_block: 0,
            block: 0,
        }
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    /// Current noise-floor energy estimate.
    pub fn noise_floor(&self) -> Option<f64> {
        self.floor
    }

    /// Gate decision for the next block, from that block's RMS level.
    pub fn update_rms(&mut self, rms: f64) -> GateDecision {
        let energy = rms * rms;
        let raw = match self.floor {
            Some(floor) => rms >= self.cfg.min_rms && energy > self.cfg.margin * floor,
            None => false,
        };
        // min-tracker: snap down immediately, rise with the time constant
        self.floor = Some(match self.floor {
            None => energy,
            Some(f) if energy < f => energy,
            Some(f) => f + self.alpha * (energy - f),
        });

        let block = self.block;
        self.block += 1;
        let mut changed = false;
        if raw != self.active {
            if self.run == 0 {
                self.run_start = block;
            }
            self.run += 1;
            if self.run >= self.cfg.hysteresis_blocks.max(1) {
                self.active = raw;
                self.since_block = self.run_start;
                self.run = 0;
                changed = true;
            }
        } else {
            self.run = 0;
        }
        GateDecision {
            active: self.active,
            raw,
            changed,
            since_block: self.since_block,
        }
    }

    pub fn update(&mut self, block: &FrameBlock) -> GateDecision {
        let ch = self.cfg.reference_channel.min(block.n_channels() - 1);
        self.update_rms(block.channel_rms(ch))
    }
}

/// One-block convenience wrapper over [`SpeechGate::update`].
pub fn speech_gate(gate: &mut SpeechGate, block: &FrameBlock) -> bool {
    gate.update(block).active
}

/// A wrapped angular interval running counter-clockwise from `start_deg` to
/// `end_deg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct Sector {
    pub start_deg: f64,
    pub end_deg: f64,
}

impl Sector {
    pub fn new(start_deg: f64, end_deg: f64) -> Self {
        Self {
            start_deg: normalize_deg(start_deg),
            end_deg: normalize_deg(end_deg),
        }
    }

    pub fn contains(&self, azimuth_deg: f64) -> bool {
        in_wrapped_interval(azimuth_deg, self.start_deg, self.end_deg)
    }
}

impl From<(f64, f64)> for Sector {
    fn from((a, b): (f64, f64)) -> Self {
        Sector::new(a, b)
    }
}

impl From<Sector> for (f64, f64) {
    fn from(s: Sector) -> Self {
        (s.start_deg, s.end_deg)
    }
}

/// Set of suppressed direction sectors. Empty means nothing is suppressed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SectorFilter {
    sectors: Vec<Sector>,
}

impl SectorFilter {
    pub fn new<I: IntoIterator<Item = Sector>>(sectors: I) -> Self {
        let mut f = Self::default();
        for s in sectors {
            if !f.sectors.contains(&s) {
                f.sectors.push(s);
            }
        }
        f
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn is_empty(&self) -> bool {
        self.sectors.is_empty()
    }

    pub fn contains(&self, azimuth_deg: f64) -> bool {
        self.sectors.iter().any(|s| s.contains(azimuth_deg))
    }

    /// Removes the sector if present, adds it otherwise.
    pub fn toggle(&mut self, sector: Sector) {
        if let Some(i) = self.sectors.iter().position(|s| *s == sector) {
            self.sectors.remove(i);
        } else {
            self.sectors.push(sector);
        }
    }
}

/// A diarized utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerSegment {
    pub start_s: f64,
    pub end_s: f64,
    #[serde(rename = "speaker")]
    pub speaker_label: Option<usize>,
    pub azimuth_deg: Option<f64>,
    pub suppressed: bool,
    pub text: Option<String>,
}

impl SpeakerSegment {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Flags the segment as suppressed iff its azimuth lies in a filter sector.
/// Text is kept; rendering decides what to show.
pub fn apply_sector_filter(mut segment: SpeakerSegment, filter: &SectorFilter) -> SpeakerSegment {
    segment.suppressed = segment.azimuth_deg.is_some_and(|a| filter.contains(a));
    segment
}

/// Azimuth of an utterance: the mode of a 10° wrapped histogram over the
/// per-block azimuths collected while it was spoken.
pub fn utterance_azimuth(angles: &[f64]) -> Option<f64> {
    wrapped_histogram_mode(angles, UTTERANCE_BIN_DEG).map(|(a, _)| a)
}

const UTTERANCE_BIN_DEG: f64 = 10.0;

/// Discrete speaker identities keyed by direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionClusters {
    centers: Vec<f64>,
    merge_radius_deg: f64,
    fixed: bool,
}

impl DirectionClusters {
    /// Clusters enrolled online as new directions appear.
    pub fn online(merge_radius_deg: f64) -> Self {
        Self {
            centers: Vec::new(),
            merge_radius_deg,
            fixed: false,
        }
    }

    /// A fixed set of known talker directions; label `i` is `directions[i]`.
    pub fn fixed(directions: &[f64], merge_radius_deg: f64) -> Self {
        Self {
            centers: directions.iter().map(|&d| normalize_deg(d)).collect(),
            merge_radius_deg,
            fixed: true,
        }
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Nearest cluster and its distance.
    pub fn nearest(&self, azimuth_deg: f64) -> Option<(usize, f64)> {
        self.centers
            .iter()
            .enumerate()
            .map(|(i, &c)| (i, wrapped_distance(c, azimuth_deg)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Whether `azimuth_deg` would start a new cluster.
    pub fn is_new_direction(&self, azimuth_deg: f64) -> bool {
        !self.fixed
            && self
                .nearest(azimuth_deg)
                .map_or(true, |(_, d)| d >= self.merge_radius_deg)
    }

    /// Label for a stable direction, enrolling a new cluster if it is at
    /// least the merge radius away from every existing one.
    pub fn assign(&mut self, azimuth_deg: f64) -> Option<usize> {
        if self.is_new_direction(azimuth_deg) {
            self.centers.push(normalize_deg(azimuth_deg));
            return Some(self.centers.len() - 1);
        }
        self.nearest(azimuth_deg).map(|(i, _)| i)
    }
}

/// Knobs for labeling and segmentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiarizerConfig {
    /// Length of the running histogram window.
    pub window_s: f64,
    pub bin_width_deg: f64,
    /// Directions closer than this share a speaker label.
    pub merge_radius_deg: f64,
    /// Blocks the running mode must hold still before it may enroll a new
    /// cluster.
    pub stable_blocks: usize,
    /// Minimum window entries behind a mode before it may enroll.
    pub min_support: usize,
    /// Blocks a different running label must persist before an open segment
    /// is split at the change.
    pub split_hold_blocks: usize,
    /// Gate pauses up to this long stay inside the current segment.
    pub bridge_gap_s: f64,
    /// Known talker directions. When set, no clusters are enrolled online.
    pub fixed_directions: Option<Vec<f64>>,
}

impl Default for DiarizerConfig {
    fn default() -> Self {
        Self {
            window_s: 0.522,
            bin_width_deg: 10.0,
            merge_radius_deg: 20.0,
            stable_blocks: 5,
            min_support: 5,
            split_hold_blocks: 23,
            bridge_gap_s: 0.35,
            fixed_directions: None,
        }
    }
}

impl DiarizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_s > 0.0) {
            return Err(Error::InvalidConfig("label window must be positive".into()));
        }
        if !(self.bin_width_deg > 0.0 && self.bin_width_deg <= 180.0) {
            return Err(Error::InvalidConfig("bin width must be in (0, 180]".into()));
        }
        if !(self.bridge_gap_s >= 0.0) {
            return Err(Error::InvalidConfig(
                "bridge gap must be non-negative".into(),
            ));
        }
        if !(self.merge_radius_deg > 0.0) {
            return Err(Error::InvalidConfig("merge radius must be positive".into()));
        }
        Ok(())
    }

    pub fn clusters(&self) -> DirectionClusters {
        match &self.fixed_directions {
            Some(dirs) => DirectionClusters::fixed(dirs, self.merge_radius_deg),
            None => DirectionClusters::online(self.merge_radius_deg),
        }
    }
}

/// Running-histogram speaker labeling over a sliding window of blocks.
#[derive(Debug, Clone)]
pub struct LabelStream {
    window_blocks: u64,
    bin_width_deg: f64,
    stable_blocks: usize,
    min_support: usize,
    entries: VecDeque<(u64, f64)>,
    last_mode: Option<f64>,
    stable_count: usize,
    clusters: DirectionClusters,
}

impl LabelStream {
    pub fn new(cfg: &DiarizerConfig, block_duration_s: f64) -> Self {
        Self {
            window_blocks: window_blocks(cfg.window_s, block_duration_s),
            bin_width_deg: cfg.bin_width_deg,
            stable_blocks: cfg.stable_blocks,
            min_support: cfg.min_support,
            entries: VecDeque::new(),
            last_mode: None,
            stable_count: 0,
            clusters: cfg.clusters(),
        }
    }

    pub fn window_blocks(&self) -> u64 {
        self.window_blocks
    }

    pub fn clusters(&self) -> &DirectionClusters {
        &self.clusters
    }

    pub fn clusters_mut(&mut self) -> &mut DirectionClusters {
        &mut self.clusters
    }

    /// Running mode of the window, if any entries remain.
    pub fn mode(&self) -> Option<f64> {
        let angles: Vec<f64> = self.entries.iter().map(|e| e.1).collect();
        wrapped_histogram_mode(&angles, self.bin_width_deg).map(|(a, _)| a)
    }

    /// Feeds one block (with its azimuth, if it has one) and returns the
    /// block's speaker label.
    pub fn update(&mut self, block_index: u64, azimuth_deg: Option<f64>) -> Option<usize> {
        while self
            .entries
            .front()
            .is_some_and(|&(b, _)| b + self.window_blocks <= block_index)
        {
            self.entries.pop_front();
        }
        if let Some(a) = azimuth_deg {
            self.entries.push_back((block_index, a));
        }
        let angles: Vec<f64> = self.entries.iter().map(|e| e.1).collect();
        let Some((mode, support)) = wrapped_histogram_mode(&angles, self.bin_width_deg) else {
            self.last_mode = None;
            self.stable_count = 0;
            return None;
        };
        let steady = self
            .last_mode
            .is_some_and(|m| wrapped_distance(m, mode) < self.bin_width_deg);
        self.stable_count = if steady { self.stable_count + 1 } else { 1 };
        self.last_mode = Some(mode);

        if self.clusters.is_new_direction(mode) {
            if self.stable_count >= self.stable_blocks && support >= self.min_support {
                return self.clusters.assign(mode);
            }
            return None;
        }
        self.clusters.nearest(mode).map(|(i, _)| i)
    }
}

fn window_blocks(window_s: f64, block_duration_s: f64) -> u64 {
    ((window_s / block_duration_s).round() as u64).max(1)
}

/// Labels a whole series of per-block estimates at once.
pub fn label_stream(
    estimates: &[Option<AngleEstimate>],
    cfg: &DiarizerConfig,
    block_duration_s: f64,
) -> Vec<Option<usize>> {
    let mut ls = LabelStream::new(cfg, block_duration_s);
    estimates
        .iter()
        .enumerate()
        .map(|(i, e)| ls.update(i as u64, e.map(|e| e.azimuth_deg)))
        .collect()
}

/// Lifecycle notifications for diarized segments.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentEvent {
    Open {
        id: u64,
        start_s: f64,
    },
    Update {
        id: u64,
        speaker_label: Option<usize>,
        azimuth_deg: Option<f64>,
        suppressed: bool,
    },
    Close {
        id: u64,
        segment: SpeakerSegment,
    },
}

#[derive(Debug, Clone)]
struct OpenSegment {
    id: u64,
    start_block: u64,
    blocks: Vec<(u64, Option<f64>)>,
    label: Option<usize>,
    challenger: Option<(usize, u64, usize)>,
    /// Block at which the gate shut, while waiting to see if it reopens.
    paused_at: Option<u64>,
}

/// Turns gated per-block azimuths into speaker segments.
///
/// A segment opens when the gate opens (backdated to the start of the gate's
/// hysteresis run) and closes when it shuts, unless the gate reopens within
/// the bridge gap. An open segment is split when
/// the running label moves to another speaker and stays there. The final
/// label of a segment is decided once, at close, from the mode of its block
/// azimuths; it never changes afterwards.
#[derive(Debug, Clone)]
pub struct Diarizer {
    cfg: DiarizerConfig,
    block_duration_s: f64,
    labels: LabelStream,
    filter: SectorFilter,
    recent: VecDeque<(u64, Option<f64>)>,
    open: Option<OpenSegment>,
    next_id: u64,
    last_block: Option<u64>,
    last_label: Option<usize>,
}

const RECENT_BLOCKS: usize = 16;

impl Diarizer {
    pub fn new(cfg: DiarizerConfig, block_duration_s: f64, filter: SectorFilter) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            labels: LabelStream::new(&cfg, block_duration_s),
            cfg,
            block_duration_s,
            filter,
            recent: VecDeque::with_capacity(RECENT_BLOCKS),
            open: None,
            next_id: 0,
            last_block: None,
            last_label: None,
        })
    }

    pub fn filter(&self) -> &SectorFilter {
        &self.filter
    }

    /// Takes effect for every segment event emitted afterwards.
    pub fn set_filter(&mut self, filter: SectorFilter) {
        self.filter = filter;
    }

    pub fn clusters(&self) -> &DirectionClusters {
        self.labels.clusters()
    }

    /// Running-histogram label of the most recent block.
    pub fn last_label(&self) -> Option<usize> {
        self.last_label
    }

    fn time(&self, block: u64) -> f64 {
        block as f64 * self.block_duration_s
    }

    /// Processes one block. `azimuth_deg` is the block's own direction
    /// estimate, if it produced one.
    pub fn process(
        &mut self,
        block_index: u64,
        gate: GateDecision,
        azimuth_deg: Option<f64>,
    ) -> Vec<SegmentEvent> {
        self.last_block = Some(block_index);
        let speechy = gate.active || gate.raw;
        let label = self
            .labels
            .update(block_index, if speechy { azimuth_deg } else { None });
        self.last_label = label;
        if self.recent.len() == RECENT_BLOCKS {
            self.recent.pop_front();
        }
        self.recent.push_back((block_index, azimuth_deg));

        let mut events = Vec::new();
        let bridge = (self.cfg.bridge_gap_s / self.block_duration_s).round() as u64;
        if gate.changed && gate.active {
            let blocks: Vec<_> = self
                .recent
                .iter()
                .copied()
                .filter(|&(b, _)| b >= gate.since_block)
                .collect();
            match self.open.take() {
                Some(mut seg)
                    if seg
                        .paused_at
                        .is_some_and(|p| gate.since_block <= p + bridge) =>
                {
                    seg.paused_at = None;
                    seg.blocks.extend(blocks);
                    self.track_label(seg, label, &mut events);
                }
                Some(seg) => {
                    let end = seg.paused_at.unwrap_or(gate.since_block);
                    events.push(self.close(seg, end));
                    events.extend(self.open_segment(gate.since_block, blocks, label));
                }
                None => events.extend(self.open_segment(gate.since_block, blocks, label)),
            }
        } else if gate.changed && !gate.active {
            if let Some(mut seg) = self.open.take() {
                seg.blocks.retain(|&(b, _)| b < gate.since_block);
                seg.paused_at = Some(gate.since_block);
                self.expire_pause(seg, block_index, bridge, &mut events);
            }
        } else if gate.active {
            if let Some(mut seg) = self.open.take() {
                seg.blocks.push((block_index, azimuth_deg));
                self.track_label(seg, label, &mut events);
            }
        } else if let Some(seg) = self.open.take() {
            self.expire_pause(seg, block_index, bridge, &mut events);
        }
        events
    }

    /// Closes a paused segment once the pause outlasts the bridge.
    fn expire_pause(
        &mut self,
        seg: OpenSegment,
        block_index: u64,
        bridge: u64,
        events: &mut Vec<SegmentEvent>,
    ) {
        match seg.paused_at {
            Some(p) if block_index >= p + bridge => events.push(self.close(seg, p)),
            _ => self.open = Some(seg),
        }
    }

    fn track_label(
        &mut self,
        mut seg: OpenSegment,
        label: Option<usize>,
        events: &mut Vec<SegmentEvent>,
    ) {
        match (seg.label, label) {
            (None, Some(l)) => {
                seg.label = Some(l);
                events.push(self.update_event(&seg));
            }
            (Some(cur), Some(l)) if cur != l => {
                let block = seg.blocks.last().map(|b| b.0).unwrap_or(seg.start_block);
                let (count, first) = match seg.challenger {
                    Some((c, first, n)) if c == l => (n + 1, first),
                    _ => (1, block),
                };
                seg.challenger = Some((l, first, count));
                if count >= self.cfg.split_hold_blocks.max(1) {
                    if first <= seg.start_block || !self.head_differs(&seg, first, l) {
                        seg.label = Some(l);
                        seg.challenger = None;
                        events.push(self.update_event(&seg));
                    } else {
                        let tail: Vec<_> = seg
                            .blocks
                            .iter()
                            .copied()
                            .filter(|&(b, _)| b >= first)
                            .collect();
                        seg.blocks.retain(|&(b, _)| b < first);
                        events.push(self.close(seg, first));
                        events.extend(self.open_segment(first, tail, Some(l)));
                        return;
                    }
                }
            }
            (Some(_), Some(_)) => seg.challenger = None,
            _ => {}
        }
        self.open = Some(seg);
    }

    /// Whether the blocks before `first` point at a speaker other than `l`.
    /// When they do not, the old label was carried over from the previous
    /// talker's tail in the running window and is simply replaced.
    fn head_differs(&self, seg: &OpenSegment, first: u64, l: usize) -> bool {
        let head: Vec<f64> = seg
            .blocks
            .iter()
            .filter(|b| b.0 < first)
            .filter_map(|b| b.1)
            .collect();
        utterance_azimuth(&head)
            .and_then(|a| self.labels.clusters().nearest(a))
            .is_some_and(|(i, d)| i != l && d < self.cfg.merge_radius_deg)
    }

    fn open_segment(
        &mut self,
        start_block: u64,
        blocks: Vec<(u64, Option<f64>)>,
        label: Option<usize>,
    ) -> Vec<SegmentEvent> {
        let seg = OpenSegment {
            id: self.next_id,
            start_block,
            blocks,
            label,
            challenger: None,
            paused_at: None,
        };
        self.next_id += 1;
        let mut events = vec![SegmentEvent::Open {
            id: seg.id,
            start_s: self.time(start_block),
        }];
        if label.is_some() {
            events.push(self.update_event(&seg));
        }
        self.open = Some(seg);
        events
    }

    fn provisional_azimuth(seg: &OpenSegment) -> Option<f64> {
        let angles: Vec<f64> = seg.blocks.iter().filter_map(|b| b.1).collect();
        utterance_azimuth(&angles)
    }

    fn update_event(&self, seg: &OpenSegment) -> SegmentEvent {
        let azimuth_deg = Self::provisional_azimuth(seg);
        SegmentEvent::Update {
            id: seg.id,
            speaker_label: seg.label,
            azimuth_deg,
            suppressed: azimuth_deg.is_some_and(|a| self.filter.contains(a)),
        }
    }

    fn close(&mut self, seg: OpenSegment, end_block: u64) -> SegmentEvent {
        let azimuth_deg = Self::provisional_azimuth(&seg);
        let speaker_label = azimuth_deg.and_then(|a| self.labels.clusters_mut().assign(a));
        let segment = apply_sector_filter(
            SpeakerSegment {
                start_s: self.time(seg.start_block),
                end_s: self.time(end_block.max(seg.start_block + 1)),
                speaker_label,
                azimuth_deg,
                suppressed: false,
                text: None,
            },
            &self.filter,
        );
        SegmentEvent::Close {
            id: seg.id,
            segment,
        }
    }

    /// Closes any open segment at the end of the last processed block.
    pub fn finish(&mut self) -> Vec<SegmentEvent> {
        let end = self.last_block.map_or(0, |b| b + 1);
        self.open
            .take()
            .map(|seg| {
                let end = seg.paused_at.unwrap_or(end);
                self.close(seg, end)
            })
            .into_iter()
            .collect()
    }
}
