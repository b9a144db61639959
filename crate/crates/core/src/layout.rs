//! Segment layouts, planning-frame indices and the global timeline.
//!
//! Local frame indices are 1-based inside a segment (frame 1 is the segment's
//! initial frame). Global timeline positions are 0-based. [`MacroLayout`] is the
//! only place that converts between the two.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("early planning frame t_a = {t_a} must be at least 2 (frame 1 is the given initial frame)")]
    EarlyFrameTooSmall { t_a: usize },
    #[error("early planning frame t_a = {t_a} must precede midpoint t_b = {t_b}")]
    EarlyNotBeforeMidpoint { t_a: usize, t_b: usize },
    #[error("midpoint planning frame t_b = {t_b} must precede terminal t_c = {t_c}")]
    MidpointNotBeforeTerminal { t_b: usize, t_c: usize },
    #[error("terminal planning frame t_c = {t_c} must equal the segment length n_frames = {n_frames}")]
    TerminalNotLast { t_c: usize, n_frames: usize },
    #[error("a macro layout needs at least one segment")]
    NoSegments,
}

/// Frames per segment and the three planning indices, validated so that
/// `1 < t_a < t_b < t_c == n_frames`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SegmentLayout {
    n_frames: usize,
    t_a: usize,
    t_b: usize,
    t_c: usize,
}

impl SegmentLayout {
    pub fn new(n_frames: usize, t_a: usize, t_b: usize, t_c: usize) -> Result<Self, LayoutError> {
        if t_a <= 1 {
            return Err(LayoutError::EarlyFrameTooSmall { t_a });
        }
        if t_a >= t_b {
            return Err(LayoutError::EarlyNotBeforeMidpoint { t_a, t_b });
        }
        if t_b >= t_c {
            return Err(LayoutError::MidpointNotBeforeTerminal { t_b, t_c });
        }
        if t_c != n_frames {
            return Err(LayoutError::TerminalNotLast { t_c, n_frames });
        }
        Ok(Self { n_frames, t_a, t_b, t_c })
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn t_a(&self) -> usize {
        self.t_a
    }

    pub fn t_b(&self) -> usize {
        self.t_b
    }

    pub fn t_c(&self) -> usize {
        self.t_c
    }

    pub fn planning_indices(&self) -> [usize; 3] {
        [self.t_a, self.t_b, self.t_c]
    }

    /// Local index of the planning frame that seeds the next segment.
    pub fn chain_start_index(&self, mode: ChainingMode) -> usize {
        match mode {
            ChainingMode::MinMemoryPeak => self.t_b,
            ChainingMode::MaxThroughput => self.t_c,
        }
    }

    /// Timeline positions each chained segment adds beyond the frame it shares
    /// with its predecessor.
    pub fn new_frames_per_segment(&self, mode: ChainingMode) -> usize {
        self.chain_start_index(mode) - 1
    }
}

impl Default for SegmentLayout {
    fn default() -> Self {
        Self { n_frames: 20, t_a: 2, t_b: 10, t_c: 20 }
    }
}

impl fmt::Display for SegmentLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n_frames, self.t_a, self.t_b, self.t_c)
    }
}

/// Which planning frame of segment `s` becomes the initial frame of `s + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ChainingMode {
    /// Chain from the midpoint frame `t_b`; frames after `t_b` are never populated.
    MinMemoryPeak,
    /// Chain from the terminal frame `t_c`; every frame is populated.
    #[default]
    MaxThroughput,
}

impl ChainingMode {
    pub const ALL: [ChainingMode; 2] = [ChainingMode::MinMemoryPeak, ChainingMode::MaxThroughput];

    pub fn short_name(&self) -> &'static str {
        match self {
            ChainingMode::MinMemoryPeak => "minmem",
            ChainingMode::MaxThroughput => "maxthr",
        }
    }
}

impl fmt::Display for ChainingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl std::str::FromStr for ChainingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "minmem" | "min-memory-peak" | "MinMemoryPeak" => Ok(ChainingMode::MinMemoryPeak),
            "maxthr" | "max-throughput" | "MaxThroughput" => Ok(ChainingMode::MaxThroughput),
            other => Err(format!("unknown chaining mode `{other}` (expected `minmem` or `maxthr`)")),
        }
    }
}

/// Position on the full-video timeline (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GlobalFrameIndex(pub usize);

impl GlobalFrameIndex {
    pub fn value(self) -> usize {
        self.0
    }
}

impl fmt::Display for GlobalFrameIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A chain of `n_segments` segments sharing one [`SegmentLayout`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MacroLayout {
    segment: SegmentLayout,
    n_segments: usize,
    mode: ChainingMode,
}

impl MacroLayout {
    pub fn new(segment: SegmentLayout, n_segments: usize, mode: ChainingMode) -> Result<Self, LayoutError> {
        if n_segments == 0 {
            return Err(LayoutError::NoSegments);
        }
        Ok(Self { segment, n_segments, mode })
    }

    pub fn segment_layout(&self) -> &SegmentLayout {
        &self.segment
    }

    pub fn n_segments(&self) -> usize {
        self.n_segments
    }

    pub fn mode(&self) -> ChainingMode {
        self.mode
    }

    pub fn chain_index(&self) -> usize {
        self.segment.chain_start_index(self.mode)
    }

    pub fn new_frames_per_segment(&self) -> usize {
        self.segment.new_frames_per_segment(self.mode)
    }

    /// Number of distinct positions on the timeline: `1 + S * new_frames_per_segment`.
    pub fn timeline_len(&self) -> usize {
        1 + self.n_segments * self.new_frames_per_segment()
    }

    /// Global position of local frame 1 of `segment`.
    pub fn segment_origin(&self, segment: usize) -> usize {
        segment * self.new_frames_per_segment()
    }

    /// Nominal time position of a local frame, defined for every frame a
    /// segment can produce (including the unused terminal frame in
    /// `MinMemoryPeak` mode, whose position may lie beyond the timeline).
    pub fn position(&self, segment: usize, local: usize) -> usize {
        debug_assert!(local >= 1);
        self.segment_origin(segment) + local - 1
    }

    /// Whether a local frame is part of the emitted video.
    pub fn is_on_timeline(&self, segment: usize, local: usize) -> bool {
        segment < self.n_segments && (1..=self.chain_index()).contains(&local)
    }

    pub fn global_index(&self, segment: usize, local: usize) -> Option<GlobalFrameIndex> {
        self.is_on_timeline(segment, local).then(|| GlobalFrameIndex(self.position(segment, local)))
    }

    pub fn timeline_map(&self) -> TimelineMap {
        let mut entries = BTreeMap::new();
        for segment in 0..self.n_segments {
            for local in 1..=self.chain_index() {
                entries.insert((segment, local), GlobalFrameIndex(self.position(segment, local)));
            }
        }
        TimelineMap { entries, len: self.timeline_len() }
    }
}

/// `(segment, local index) -> GlobalFrameIndex` for every on-timeline frame.
///
/// Local frame 1 of segment `s > 0` shares its index with the chain frame of
/// segment `s - 1`; all other entries are distinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimelineMap {
    entries: BTreeMap<(usize, usize), GlobalFrameIndex>,
    len: usize,
}

impl TimelineMap {
    pub fn get(&self, segment: usize, local: usize) -> Option<GlobalFrameIndex> {
        self.entries.get(&(segment, local)).copied()
    }

    /// Total timeline length.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), GlobalFrameIndex)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }
}
