//! Frame-to-frame region IDs and sliding-window voting.
//!
//! Each frame's regions are matched to the previous frame's centroids by
//! Euclidean distance (strictly below the threshold), the resulting ID set
//! is pushed into a fixed-length window, and only regions whose IDs win the
//! vote survive into the output mask.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{
    filter_by_area, label_regions, BinaryMask, Connectivity, LabelMap, Morphology, RegionStats,
    StructuringElement,
};

/// Track identifier, allocated from 1 upward and never reused in a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrackId(pub u64);

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone)]
pub struct TrackerState {
    previous: Vec<(TrackId, (f64, f64))>,
    next_id: u64,
    dist_threshold: f64,
}

impl TrackerState {
    pub fn new(dist_threshold: f64) -> Result<Self> {
        if !(dist_threshold > 0.0 && dist_threshold.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "distance threshold must be positive, got {dist_threshold}"
            )));
        }
        Ok(Self {
            previous: Vec::new(),
            next_id: 1,
            dist_threshold,
        })
    }

    /// Starts from a known previous frame; fresh IDs continue above the
    /// largest one given.
    pub fn with_previous(dist_threshold: f64, previous: Vec<(TrackId, (f64, f64))>) -> Result<Self> {
        let mut state = Self::new(dist_threshold)?;
        let mut seen = BTreeSet::new();
        for (id, _) in &previous {
            if id.0 == 0 || !seen.insert(*id) {
                return Err(Error::InvalidConfig(format!("duplicate or zero track id {id}")));
            }
        }
        state.next_id = seen.last().map_or(1, |id| id.0 + 1);
        state.previous = previous;
        Ok(state)
    }

    pub fn previous(&self) -> &[(TrackId, (f64, f64))] {
        &self.previous
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn dist_threshold(&self) -> f64 {
        self.dist_threshold
    }

    fn fresh(&mut self) -> TrackId {
        let id = TrackId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Gives every region an ID and replaces the previous-frame set.
    ///
    /// Candidate (previous, current) pairs closer than the threshold are
    /// accepted nearest-first while both ends are unclaimed; everything
    /// else gets a fresh ID in region order.
    pub fn assign_ids(&mut self, regions: &[RegionStats]) -> Vec<(RegionStats, TrackId)> {
        let mut pairs = Vec::new();
        for (p, (_, prev)) in self.previous.iter().enumerate() {
            for (c, region) in regions.iter().enumerate() {
                let d = (region.centroid.0 - prev.0).hypot(region.centroid.1 - prev.1);
                if d < self.dist_threshold {
                    pairs.push((d, p, c));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut matched: Vec<Option<TrackId>> = vec![None; regions.len()];
        let mut claimed = vec![false; self.previous.len()];
        for (_, p, c) in pairs {
            if !claimed[p] && matched[c].is_none() {
                claimed[p] = true;
                matched[c] = Some(self.previous[p].0);
            }
        }

        let assigned: Vec<_> = regions
            .iter()
            .zip(matched)
            .map(|(r, m)| (*r, m.unwrap_or_else(|| self.fresh())))
            .collect();
        self.previous = assigned.iter().map(|(r, id)| (*id, r.centroid)).collect();
        assigned
    }
}

/// Which IDs survive the vote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KeepMode {
    /// The single most frequent ID; ties go to the smallest ID.
    #[default]
    SingleArgmax,
    /// Every ID present in at least `ceil(f * frames)` window frames.
    Fraction(f64),
}

impl KeepMode {
    pub fn validate(self) -> Result<Self> {
        match self {
            KeepMode::Fraction(f) if !(f > 0.0 && f <= 1.0) => Err(Error::InvalidConfig(format!(
                "keep fraction must lie in (0, 1], got {f}"
            ))),
            m => Ok(m),
        }
    }
}

impl FromStr for KeepMode {
    type Err = Error;

    /// `argmax` or `fraction:F`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "argmax" || s == "single_argmax" {
            return Ok(KeepMode::SingleArgmax);
        }
        if let Some(f) = s.strip_prefix("fraction:") {
            let f = f
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad keep fraction {f:?}")))?;
            return KeepMode::Fraction(f).validate();
        }
        Err(Error::InvalidConfig(format!(
            "keep mode must be argmax or fraction:F, got {s:?}"
        )))
    }
}

impl fmt::Display for KeepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeepMode::SingleArgmax => write!(f, "argmax"),
            KeepMode::Fraction(x) => write!(f, "fraction:{x}"),
        }
    }
}

/// FIFO of the last `capacity` frames' ID sets with running counts.
#[derive(Debug, Clone)]
pub struct VoteWindow {
    capacity: usize,
    queue: VecDeque<BTreeSet<TrackId>>,
    counts: BTreeMap<TrackId, usize>,
}

impl VoteWindow {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("window size must be at least 1".into()));
        }
        Ok(Self {
            capacity,
            queue: VecDeque::with_capacity(capacity + 1),
            counts: BTreeMap::new(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// Stored frames, oldest first.
    pub fn frames(&self) -> impl Iterator<Item = &BTreeSet<TrackId>> {
        self.queue.iter()
    }

    /// Number of stored frames each ID appears in.
    pub fn counts(&self) -> &BTreeMap<TrackId, usize> {
        &self.counts
    }

    pub fn push(&mut self, frame_ids: BTreeSet<TrackId>) {
        for id in &frame_ids {
            *self.counts.entry(*id).or_insert(0) += 1;
        }
        self.queue.push_back(frame_ids);
        while self.queue.len() > self.capacity {
            let evicted = self.queue.pop_front().expect("non-empty queue");
            for id in evicted {
                let c = self.counts.get_mut(&id).expect("evicted id was counted");
                *c -= 1;
                if *c == 0 {
                    self.counts.remove(&id);
                }
            }
        }
    }

    pub fn vote(&self, mode: KeepMode) -> BTreeSet<TrackId> {
        match mode {
            KeepMode::SingleArgmax => {
                let mut best: Option<(TrackId, usize)> = None;
                // ascending id order, so only a strictly larger count displaces
                for (&id, &count) in &self.counts {
                    if best.is_none_or(|(_, c)| count > c) {
                        best = Some((id, count));
                    }
                }
                best.map(|(id, _)| id).into_iter().collect()
            }
            KeepMode::Fraction(f) => {
                let need = (f * self.queue.len() as f64).ceil().max(1.0) as usize;
                self.counts
                    .iter()
                    .filter(|(_, &c)| c >= need)
                    .map(|(&id, _)| id)
                    .collect()
            }
        }
    }

    pub fn push_and_vote(&mut self, frame_ids: BTreeSet<TrackId>, mode: KeepMode) -> BTreeSet<TrackId> {
        self.push(frame_ids);
        self.vote(mode)
    }
}

/// Union of the pixels of regions whose ID is kept.
pub fn filter_mask(
    labels: &LabelMap,
    assigned: &[(RegionStats, TrackId)],
    keep: &BTreeSet<TrackId>,
) -> BinaryMask {
    let max_label = assigned.iter().map(|(r, _)| r.label).max().unwrap_or(0) as usize;
    let mut keep_label = vec![false; max_label + 1];
    for (region, id) in assigned {
        if keep.contains(id) {
            keep_label[region.label as usize] = true;
        }
    }
    let data = labels
        .labels()
        .iter()
        .map(|&l| (l as usize) < keep_label.len() && keep_label[l as usize])
        .collect();
    BinaryMask::from_vec(labels.width(), labels.height(), data).expect("label map dims")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub kernel: StructuringElement,
    pub min_area: usize,
    pub connectivity: Connectivity,
    pub window: usize,
    pub dist_threshold: f64,
    pub keep_mode: KeepMode,
    pub morphology: Morphology,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            kernel: StructuringElement::default(),
            min_area: 50,
            connectivity: Connectivity::Eight,
            window: 45,
            dist_threshold: 50.0,
            keep_mode: KeepMode::SingleArgmax,
            morphology: Morphology::Erode,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        StructuringElement::new(self.kernel.rows(), self.kernel.cols())?;
        if self.window == 0 {
            return Err(Error::InvalidConfig("window size must be at least 1".into()));
        }
        if !(self.dist_threshold > 0.0 && self.dist_threshold.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "distance threshold must be positive, got {}",
                self.dist_threshold
            )));
        }
        self.keep_mode.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FrameResult {
    pub index: usize,
    /// Mask after the morphology step, before region filtering.
    pub morphed: BinaryMask,
    pub assigned: Vec<(RegionStats, TrackId)>,
    pub kept_ids: BTreeSet<TrackId>,
    pub vote_counts: BTreeMap<TrackId, usize>,
    pub output: BinaryMask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignedRegion {
    pub id: TrackId,
    pub area: usize,
    pub centroid: (f64, f64),
}

/// One line of the per-frame JSON log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLog {
    pub frame: usize,
    pub regions: usize,
    pub assigned: Vec<AssignedRegion>,
    pub kept: Vec<TrackId>,
    /// `(id, count)` pairs in ascending id order.
    pub votes: Vec<(TrackId, usize)>,
}

impl FrameResult {
    pub fn log(&self) -> FrameLog {
        FrameLog {
            frame: self.index,
            regions: self.assigned.len(),
            assigned: self
                .assigned
                .iter()
                .map(|(r, id)| AssignedRegion {
                    id: *id,
                    area: r.area,
                    centroid: r.centroid,
                })
                .collect(),
            kept: self.kept_ids.iter().copied().collect(),
            votes: self.vote_counts.iter().map(|(&id, &c)| (id, c)).collect(),
        }
    }
}

/// Stateful per-sequence denoiser. Frames must arrive in order.
#[derive(Debug, Clone)]
pub struct SlidingWindowDenoiser {
    config: PipelineConfig,
    tracker: TrackerState,
    window: VoteWindow,
    dims: Option<(usize, usize)>,
    frames_seen: usize,
}

impl SlidingWindowDenoiser {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            tracker: TrackerState::new(config.dist_threshold)?,
            window: VoteWindow::new(config.window)?,
            config,
            dims: None,
            frames_seen: 0,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn tracker(&self) -> &TrackerState {
        &self.tracker
    }

    pub fn window(&self) -> &VoteWindow {
        &self.window
    }

    pub fn frames_seen(&self) -> usize {
        self.frames_seen
    }

    /// morphology, labelling, area filter, ID assignment, vote, mask filter.
    pub fn process_frame(&mut self, mask: &BinaryMask) -> Result<FrameResult> {
        match self.dims {
            Some(d) if d != mask.dims() => {
                return Err(Error::SequenceDimensionChange {
                    frame: self.frames_seen,
                    expected: d,
                    found: mask.dims(),
                })
            }
            _ => {}
        }
        let morphed = self.config.morphology.apply(mask, self.config.kernel)?;
        self.dims = Some(mask.dims());

        let (labels, regions) = label_regions(&morphed, self.config.connectivity);
        let regions = filter_by_area(&regions, self.config.min_area);
        let assigned = self.tracker.assign_ids(&regions);
        let frame_ids = assigned.iter().map(|(_, id)| *id).collect();
        let kept_ids = self.window.push_and_vote(frame_ids, self.config.keep_mode);
        let output = filter_mask(&labels, &assigned, &kept_ids);

        let index = self.frames_seen;
        self.frames_seen += 1;
        Ok(FrameResult {
            index,
            morphed,
            assigned,
            kept_ids,
            vote_counts: self.window.counts().clone(),
            output,
        })
    }
}
