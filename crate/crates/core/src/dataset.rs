//! Trajectories, targets and the tune/test query–reference split.
//!
//! All indices exposed here are 1-based: trajectory `i` covers
//! `x_i, …, x_{i+L-1}` and its step-`h` target is `x_{i+L-1+h}`.

use std::fmt;
use std::ops::RangeInclusive;

use chrono::NaiveDateTime;

use crate::error::{Error, Result};
use crate::ingestion::TimeSeries;

/// A length-`len` window of the series plus its step-`step` target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TrajectoryView {
    pub start: usize,
    pub len: usize,
    pub step: usize,
}

impl TrajectoryView {
    pub fn new(start: usize, len: usize, step: usize) -> Result<Self> {
        if start == 0 || len == 0 || step == 0 {
            return Err(Error::invalid(format!(
                "trajectory needs start ≥ 1, L ≥ 1, h ≥ 1 (got {start}, {len}, {step})"
            )));
        }
        Ok(Self { start, len, step })
    }

    /// The trajectory whose step-`step` target is observation `target`.
    pub fn for_target(target: usize, len: usize, step: usize) -> Option<Self> {
        let start = target.checked_sub(len + step - 1)?;
        (start >= 1 && len >= 1 && step >= 1).then_some(Self { start, len, step })
    }

    pub fn target_index(&self) -> usize {
        self.start + self.len - 1 + self.step
    }

    /// Index of the most recent observation in the window.
    pub fn last_index(&self) -> usize {
        self.start + self.len - 1
    }

    pub fn window<'a>(&self, values: &'a [f64]) -> &'a [f64] {
        &values[self.start - 1..self.start - 1 + self.len]
    }

    pub fn target(&self, values: &[f64]) -> f64 {
        values[self.target_index() - 1]
    }
}

/// Number of complete trajectories in a series of length `total`.
pub fn trajectory_count(total: usize, len: usize, step: usize) -> usize {
    (total + 1).saturating_sub(len + step)
}

pub fn make_trajectories(ts: &TimeSeries, len: usize, step: usize) -> Result<Vec<TrajectoryView>> {
    if len == 0 || step == 0 {
        return Err(Error::invalid("L and h must be positive"));
    }
    if ts.len() < len + step {
        return Err(Error::insufficient(format!(
            "series of length {} is shorter than L + h = {}",
            ts.len(),
            len + step
        )));
    }
    Ok((1..=trajectory_count(ts.len(), len, step))
        .map(|start| TrajectoryView { start, len, step })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Tune,
    Test,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Tune => "tune",
            Side::Test => "test",
        })
    }
}

/// How far back the test reference sets reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HistoryRule {
    /// Test references start at `w` with `s − 1 = N − w`, so tune and test
    /// queries see equally long histories.
    #[default]
    EqualHistory,
    /// Test references start at the first trajectory (`w = 1`).
    FromStart,
}

/// Boundary timestamps of the query splits. The tune reference always starts
/// at the beginning of the series; the test query split runs to its end.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitDates {
    pub tune_query_start: NaiveDateTime,
    pub test_query_start: NaiveDateTime,
    pub history: HistoryRule,
}

/// Window-independent split over observation (target) indices.
///
/// Tune queries forecast observations `tune_first..test_first`, test queries
/// `test_first..=total`; both ranges have equal size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitPlan {
    pub total: usize,
    pub tune_first: usize,
    pub test_first: usize,
    pub history: HistoryRule,
}

impl SplitPlan {
    pub fn new(total: usize, tune_first: usize, test_first: usize, history: HistoryRule) -> Result<Self> {
        let plan = Self {
            total,
            tune_first,
            test_first,
            history,
        };
        if tune_first < 2 || tune_first >= test_first || test_first > total {
            return Err(Error::Split(format!(
                "need 2 ≤ tune start < test start ≤ T (got {tune_first}, {test_first}, T={total})"
            )));
        }
        let (tune, test) = (plan.tune_len(), plan.test_len());
        if tune != test {
            return Err(Error::Split(format!(
                "unequal query splits: tune has {tune} queries, test has {test}"
            )));
        }
        Ok(plan)
    }

    /// Builds the plan from boundary timestamps, moving the test boundary by
    /// at most one slot to satisfy the equal-size constraint.
    pub fn from_dates(ts: &TimeSeries, dates: &SplitDates) -> Result<Self> {
        let locate = |when: NaiveDateTime, what: &str| {
            ts.index_of(when).map(|i| i + 1).ok_or_else(|| {
                Error::Split(format!("{what} {when} is not a slot inside the series"))
            })
        };
        let mut tune_first = locate(dates.tune_query_start, "tune query start")?;
        let requested = locate(dates.test_query_start, "test query start")?;
        let total = ts.len();
        if (total + 1 + tune_first) % 2 == 1 {
            // parity fix: drop the first tune query
            tune_first += 1;
        }
        let balanced = (total + 1 + tune_first) / 2;
        if balanced.abs_diff(requested) > 1 {
            return Err(Error::Split(format!(
                "test start {} gives {} tune queries vs {} test queries; balanced start would be slot {}",
                dates.test_query_start,
                requested.saturating_sub(tune_first),
                (total + 1).saturating_sub(requested),
                balanced
            )));
        }
        Self::new(total, tune_first, balanced, dates.history)
    }

    pub fn tune_len(&self) -> usize {
        self.test_first - self.tune_first
    }

    pub fn test_len(&self) -> usize {
        self.total + 1 - self.test_first
    }

    pub fn targets(&self, side: Side) -> RangeInclusive<usize> {
        match side {
            Side::Tune => self.tune_first..=self.test_first - 1,
            Side::Test => self.test_first..=self.total,
        }
    }

    /// Which split's reference rule governs a forecast of `target`.
    /// Observations before the tune queries follow the tune rule.
    pub fn side_of(&self, target: usize) -> Side {
        if target >= self.test_first {
            Side::Test
        } else {
            Side::Tune
        }
    }

    /// Test reference floor `w` in trajectory indices. It does not depend on
    /// `L` or `h`: `w = N + 1 − s` and both `N` and `s` shift by `L + h − 1`.
    pub fn test_floor(&self) -> usize {
        match self.history {
            HistoryRule::EqualHistory => self.total + 1 - self.test_first,
            HistoryRule::FromStart => 1,
        }
    }

    /// Reference set for forecasting observation `target` with a length-`window`
    /// trajectory, including warm-up targets before the tune queries.
    pub fn reference_for_target(&self, target: usize, window: usize, step: usize) -> Result<ReferenceSet> {
        let offset = window + step - 1;
        if target > self.total || target <= offset {
            return Err(Error::insufficient(format!(
                "observation {target} has no length-{window} trajectory {step} step(s) before it"
            )));
        }
        let q = target - offset;
        let first = match self.side_of(target) {
            Side::Tune => 1,
            Side::Test => self.test_floor(),
        };
        Ok(ReferenceSet::range(q, first, q.saturating_sub(step)))
    }

    pub fn config(&self, window: usize, step: usize) -> Result<SplitConfig> {
        let offset = window + step - 1;
        let n_traj = trajectory_count(self.total, window, step);
        let u = self.tune_first.checked_sub(offset).filter(|u| *u >= 1).ok_or_else(|| {
            Error::Split(format!(
                "tune queries start at observation {} which is too early for L={window}, h={step}",
                self.tune_first
            ))
        })?;
        SplitConfig::new(n_traj, window, step, u, self.test_first - offset, self.history)
    }
}

/// Query ranges and test reference floor in trajectory-start indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitConfig {
    /// Number of trajectories `N = T − L − h + 1` (`T − L` for one step).
    pub n_traj: usize,
    pub window: usize,
    pub step: usize,
    pub u: usize,
    pub s: usize,
    pub w: usize,
}

impl SplitConfig {
    pub fn new(
        n_traj: usize,
        window: usize,
        step: usize,
        u: usize,
        s: usize,
        history: HistoryRule,
    ) -> Result<Self> {
        if u < 1 || u >= s || s > n_traj {
            return Err(Error::Split(format!(
                "need 1 ≤ u < s ≤ N (got u={u}, s={s}, N={n_traj})"
            )));
        }
        let (tune, test) = (s - u, n_traj + 1 - s);
        if tune != test {
            return Err(Error::Split(format!(
                "unequal query splits: tune side has {tune}, test side has {test} (u={u}, s={s}, N={n_traj})"
            )));
        }
        let w = match history {
            HistoryRule::EqualHistory => n_traj + 1 - s,
            HistoryRule::FromStart => 1,
        };
        Ok(Self {
            n_traj,
            window,
            step,
            u,
            s,
            w,
        })
    }

    pub fn queries(&self, side: Side) -> RangeInclusive<usize> {
        match side {
            Side::Tune => self.u..=self.s - 1,
            Side::Test => self.s..=self.n_traj,
        }
    }

    pub fn view(&self, q: usize) -> TrajectoryView {
        TrajectoryView {
            start: q,
            len: self.window,
            step: self.step,
        }
    }

    /// Query trajectory forecasting observation `target`, if any.
    pub fn query_for_target(&self, target: usize) -> Option<usize> {
        TrajectoryView::for_target(target, self.window, self.step).map(|v| v.start)
    }
}

pub fn build_split(ts: &TimeSeries, dates: &SplitDates, window: usize, step: usize) -> Result<SplitConfig> {
    SplitPlan::from_dates(ts, dates)?.config(window, step)
}

/// Members of a reference set: a contiguous run or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Members {
    Range { first: usize, last: usize },
    List(Vec<usize>),
}

/// Trajectories eligible as neighbours of query `query`; always strictly
/// earlier than the query and never with a target after its last observation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceSet {
    pub query: usize,
    pub members: Members,
}

pub enum MemberIter<'a> {
    Range(RangeInclusive<usize>),
    List(std::slice::Iter<'a, usize>),
}

impl Iterator for MemberIter<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        match self {
            MemberIter::Range(r) => r.next(),
            MemberIter::List(it) => it.next().copied(),
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        match self {
            MemberIter::Range(r) => r.size_hint(),
            MemberIter::List(it) => it.size_hint(),
        }
    }
}

impl ReferenceSet {
    /// Contiguous members `first..=last`; empty when `last < first`.
    pub fn range(query: usize, first: usize, last: usize) -> Self {
        Self {
            query,
            members: Members::Range { first, last },
        }
    }

    pub fn iter(&self) -> MemberIter<'_> {
        match &self.members {
            Members::Range { first, last } if last >= first => MemberIter::Range(*first..=*last),
            Members::Range { .. } => MemberIter::Range(1..=0),
            Members::List(v) => MemberIter::List(v.iter()),
        }
    }

    pub fn len(&self) -> usize {
        match &self.members {
            Members::Range { first, last } => (last + 1).saturating_sub(*first),
            Members::List(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn bounds(&self) -> Option<(usize, usize)> {
        match &self.members {
            Members::Range { first, last } => (last >= first).then_some((*first, *last)),
            Members::List(v) => Some((*v.first()?, *v.last()?)),
        }
    }
}

/// Reference set of query `q`: `[1, q−h]` for tune, `[w, q−h]` for test.
///
/// With `h = 1` this is `[1, q−1]` / `[w, q−1]`; for longer steps the upper
/// end is pulled back so no reference target lies after the query's last
/// observation.
pub fn reference_for(q: usize, split: &SplitConfig, side: Side) -> Result<ReferenceSet> {
    let range = split.queries(side);
    if !range.contains(&q) {
        return Err(Error::invalid(format!(
            "query {q} outside the {side} query range {}..={}",
            range.start(),
            range.end()
        )));
    }
    let first = match side {
        Side::Tune => 1,
        Side::Test => split.w,
    };
    let last = q.saturating_sub(split.step);
    Ok(ReferenceSet::range(q, first, last))
}

/// Reference set for a query that may lie before the tune split (used for
/// warm-up forecasts feeding error histories).
pub fn reference_for_any(q: usize, split: &SplitConfig, side: Side) -> ReferenceSet {
    let first = match side {
        Side::Tune => 1,
        Side::Test => split.w,
    };
    ReferenceSet::range(q, first, q.saturating_sub(split.step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{Duration, NaiveDate};
    use proptest::prelude::*;

    fn series(n: usize) -> TimeSeries {
        let start = NaiveDate::from_ymd_opt(2020, 10, 5)
            .unwrap()
            .and_hms_opt(0, 0, 0)
            .unwrap();
        TimeSeries::new(start, (1..=n).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn trajectories_one_step() {
        let ts = series(5);
        let views = make_trajectories(&ts, 2, 1).unwrap();
        let pairs: Vec<_> = views
            .iter()
            .map(|v| (v.window(ts.values()).to_vec(), v.target(ts.values())))
            .collect();
        assert_eq!(
            pairs,
            vec![
                (vec![1.0, 2.0], 3.0),
                (vec![2.0, 3.0], 4.0),
                (vec![3.0, 4.0], 5.0)
            ]
        );
    }

    #[test]
    fn trajectories_three_steps() {
        let ts = series(5);
        let views = make_trajectories(&ts, 2, 3).unwrap();
        assert_eq!(views.len(), 1);
        assert_eq!(views[0].window(ts.values()), &[1.0, 2.0]);
        assert_eq!(views[0].target(ts.values()), 5.0);
    }

    #[test]
    fn too_short_for_window() {
        assert!(make_trajectories(&series(3), 3, 1).is_err());
    }

    #[test]
    fn targets_reproduce_shifted_series() {
        let ts = series(40);
        let l = 6;
        let targets: Vec<f64> = make_trajectories(&ts, l, 1)
            .unwrap()
            .iter()
            .map(|v| v.target(ts.values()))
            .collect();
        assert_eq!(targets.as_slice(), &ts.values()[l..]);
    }

    #[test]
    fn balanced_split_config() {
        let split = SplitConfig::new(100, 4, 1, 1, 51, HistoryRule::FromStart).unwrap();
        assert_eq!(split.queries(Side::Tune), 1..=50);
        assert_eq!(split.queries(Side::Test), 51..=100);
        assert_eq!(split.w, 1);
        let eq = SplitConfig::new(100, 4, 1, 1, 51, HistoryRule::EqualHistory).unwrap();
        // s − 1 = N − w
        assert_eq!(eq.s - 1, eq.n_traj - eq.w);
    }

    #[test]
    fn unbalanced_split_reports_both_sides() {
        let err = SplitConfig::new(100, 4, 1, 1, 60, HistoryRule::FromStart).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("59") && msg.contains("41"), "{msg}");
    }

    #[test]
    fn reference_sets() {
        let split = SplitConfig::new(100, 4, 1, 1, 51, HistoryRule::FromStart).unwrap();
        let r = reference_for(10, &split, Side::Tune).unwrap();
        assert_eq!(r.bounds(), Some((1, 9)));
        let split5 = SplitConfig { w: 5, ..split };
        let r = reference_for(51, &split5, Side::Test).unwrap();
        assert_eq!(r.bounds(), Some((5, 50)));
        let r = reference_for(1, &split, Side::Tune).unwrap();
        assert!(r.is_empty());
        assert!(reference_for(60, &split, Side::Tune).is_err());
    }

    #[test]
    fn multi_step_reference_stops_before_query_end() {
        let split = SplitConfig::new(100, 4, 3, 1, 51, HistoryRule::FromStart).unwrap();
        let r = reference_for(20, &split, Side::Tune).unwrap();
        let (_, last) = r.bounds().unwrap();
        let query = split.view(20);
        let latest = split.view(last);
        assert_eq!(latest.target_index(), query.last_index());
    }

    #[test]
    fn plan_from_dates_station_layout() {
        // 2020-10-05 .. 2022-06-05 style layout, shortened to keep it small
        let ts = series(96 * 30);
        let at = |slot: usize| ts.start() + Duration::minutes(15 * slot as i64);
        let total = ts.len();
        let tune_first = 96 * 10 + 1;
        let balanced = (total + 1 + tune_first) / 2;
        let dates = SplitDates {
            tune_query_start: at(tune_first - 1),
            test_query_start: at(balanced), // one slot late
            history: HistoryRule::EqualHistory,
        };
        let plan = SplitPlan::from_dates(&ts, &dates).unwrap();
        assert_eq!(plan.tune_len(), plan.test_len());
        let cfg = plan.config(14, 1).unwrap();
        assert_eq!(cfg.n_traj - cfg.s, cfg.s - 1 - cfg.u);
        assert_eq!(cfg.s - 1, cfg.n_traj - cfg.w);

        let far = SplitDates {
            test_query_start: at(balanced + 10),
            ..dates
        };
        assert!(SplitPlan::from_dates(&ts, &far).is_err());
    }

    #[test]
    fn plan_targets_are_window_independent() {
        let plan = SplitPlan::new(1000, 401, 701, HistoryRule::EqualHistory).unwrap();
        for (l, h) in [(2, 1), (14, 1), (10, 5)] {
            let cfg = plan.config(l, h).unwrap();
            assert_eq!(cfg.view(cfg.u).target_index(), 401);
            assert_eq!(cfg.view(cfg.s).target_index(), 701);
            assert_eq!(cfg.view(cfg.n_traj).target_index(), 1000);
        }
    }

    proptest! {
        #[test]
        fn references_never_leak(
            n in 20usize..400, frac in 0.2f64..0.45, step in 1usize..6,
            from_start in any::<bool>(), pick in 0.0f64..1.0
        ) {
            let u = ((n as f64 * frac) as usize).max(1);
            // balanced s for this u: N − s = s − 1 − u
            prop_assume!((n + 1 + u) % 2 == 0);
            let s = (n + 1 + u) / 2;
            let history = if from_start { HistoryRule::FromStart } else { HistoryRule::EqualHistory };
            let split = SplitConfig::new(n, 5, step, u, s, history).unwrap();
            prop_assert_eq!(split.s - split.u, split.n_traj + 1 - split.s);
            for side in [Side::Tune, Side::Test] {
                let range = split.queries(side);
                let q = range.start() + ((range.end() - range.start()) as f64 * pick) as usize;
                let refs = reference_for(q, &split, side).unwrap();
                let query = split.view(q);
                for m in refs.iter() {
                    prop_assert!(m < q);
                    prop_assert!(split.view(m).target_index() <= query.last_index());
                }
            }
        }
    }
}
