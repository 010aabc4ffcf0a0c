//! Exact K-nearest trajectory search and the seasonal reference filter.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::dataset::{Members, ReferenceSet, TrajectoryView};
use crate::distances::Distance;
use crate::error::{Error, Result};
use crate::ingestion::{TimeSeries, SLOTS_PER_DAY};

/// A value sequence cut into length-`window` trajectories with step-`step`
/// targets. Indices are 1-based trajectory starts.
#[derive(Debug, Clone, Copy)]
pub struct Trajectories<'a> {
    values: &'a [f64],
    start_slot: usize,
    window: usize,
    step: usize,
}

impl<'a> Trajectories<'a> {
    /// `start_slot` is the slot of day of `values[0]`.
    pub fn new(values: &'a [f64], start_slot: usize, window: usize, step: usize) -> Self {
        Self {
            values,
            start_slot: start_slot % SLOTS_PER_DAY,
            window,
            step,
        }
    }

    pub fn from_series(ts: &'a TimeSeries, window: usize, step: usize) -> Self {
        Self::new(ts.values(), ts.start_slot(), window, step)
    }

    pub fn values(&self) -> &'a [f64] {
        self.values
    }

    pub fn window_len(&self) -> usize {
        self.window
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn count(&self) -> usize {
        crate::dataset::trajectory_count(self.values.len(), self.window, self.step)
    }

    pub fn view(&self, start: usize) -> TrajectoryView {
        TrajectoryView {
            start,
            len: self.window,
            step: self.step,
        }
    }

    pub fn window_of(&self, start: usize) -> &'a [f64] {
        &self.values[start - 1..start - 1 + self.window]
    }

    pub fn target_of(&self, start: usize) -> f64 {
        self.values[start + self.window + self.step - 2]
    }

    /// Slot of day of trajectory `start`'s target.
    pub fn target_slot(&self, start: usize) -> usize {
        (self.start_slot + start + self.window + self.step - 2) % SLOTS_PER_DAY
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub value: f64,
    pub distance: f64,
    /// Start index of the neighbouring trajectory.
    pub source: usize,
}

/// Nearest-neighbour targets ordered by ascending distance (ties: more
/// recent source first).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CandidateSet {
    pub entries: Vec<Candidate>,
    pub k: usize,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|c| c.value).collect()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.entries.iter().map(|c| c.distance).collect()
    }

    /// The nearest `k` entries; valid because selection is prefix-stable.
    pub fn truncated(&self, k: usize) -> Self {
        Self {
            entries: self.entries.iter().take(k).copied().collect(),
            k,
        }
    }

    /// Entry positions ordered by value, ties by distance rank.
    pub fn value_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.sort_by(|&a, &b| {
            self.entries[a]
                .value
                .total_cmp(&self.entries[b].value)
                .then(a.cmp(&b))
        });
        order
    }
}

/// Admits reference trajectories whose target time of day is within
/// `radius` slots (circularly) of the query's target slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeasonalFilter {
    radius: usize,
}

impl SeasonalFilter {
    pub const MAX_RADIUS: usize = SLOTS_PER_DAY / 2;

    pub fn new(radius: usize) -> Result<Self> {
        if radius > Self::MAX_RADIUS {
            return Err(Error::invalid(format!(
                "seasonal radius {radius} exceeds {}",
                Self::MAX_RADIUS
            )));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn admits(&self, query_slot: usize, slot: usize) -> bool {
        let diff = query_slot.abs_diff(slot) % SLOTS_PER_DAY;
        diff.min(SLOTS_PER_DAY - diff) <= self.radius
    }

    pub fn apply(
        &self,
        traj: &Trajectories<'_>,
        reference: &ReferenceSet,
        query_slot: usize,
    ) -> Result<ReferenceSet> {
        seasonal_filter(traj, reference, query_slot, self.radius)
    }
}

pub fn seasonal_filter(
    traj: &Trajectories<'_>,
    reference: &ReferenceSet,
    query_slot: usize,
    radius: usize,
) -> Result<ReferenceSet> {
    let filter = SeasonalFilter::new(radius)?;
    let kept: Vec<usize> = match &reference.members {
        Members::Range { first, last } if radius < SeasonalFilter::MAX_RADIUS => {
            let (first, last) = (*first, *last);
            let mut kept = Vec::new();
            if last >= first {
                for off in 0..=2 * radius {
                    let slot = (query_slot + SLOTS_PER_DAY + off - radius) % SLOTS_PER_DAY;
                    let shift = (slot + SLOTS_PER_DAY - traj.target_slot(first)) % SLOTS_PER_DAY;
                    kept.extend((first + shift..=last).step_by(SLOTS_PER_DAY));
                }
                kept.sort_unstable();
            }
            kept
        }
        _ => reference
            .iter()
            .filter(|&i| filter.admits(query_slot, traj.target_slot(i)))
            .collect(),
    };
    if kept.is_empty() {
        return Err(Error::EmptyReference {
            query: reference.query,
        });
    }
    Ok(ReferenceSet {
        query: reference.query,
        members: Members::List(kept),
    })
}

#[derive(Debug, Clone, Copy)]
struct Ranked(Candidate);

impl Ranked {
    /// Greater means worse: larger distance, then older source.
    fn rank(&self, other: &Self) -> Ordering {
        self.0
            .distance
            .total_cmp(&other.0.distance)
            .then(other.0.source.cmp(&self.0.source))
    }
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.rank(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank(other)
    }
}

/// The `k` reference trajectories closest to trajectory `query`.
///
/// Linear scan with a bounded max-heap; ties in distance go to the more
/// recent (larger) source index. Returns fewer than `k` entries when the
/// reference set is smaller.
pub fn k_nearest(
    traj: &Trajectories<'_>,
    query: usize,
    reference: &ReferenceSet,
    distance: &dyn Distance,
    k: usize,
) -> Result<CandidateSet> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if reference.is_empty() {
        return Err(Error::EmptyReference { query });
    }
    let q = traj.window_of(query);
    let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k + 1);
    for i in reference.iter() {
        let d = distance.distance(q, traj.window_of(i))?;
        let entry = Ranked(Candidate {
            value: traj.target_of(i),
            distance: d,
            source: i,
        });
        if heap.len() < k {
            heap.push(entry);
        } else if let Some(mut worst) = heap.peek_mut() {
            if entry < *worst {
                *worst = entry;
            }
        }
    }
    Ok(CandidateSet {
        entries: heap.into_sorted_vec().into_iter().map(|r| r.0).collect(),
        k,
    })
}
