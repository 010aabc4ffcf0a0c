//! Point forecasts from nearest-neighbour candidates.
//!
//! Aggregators turn a [`CandidateSet`] into a single value. Config names:
//! `mean`, `m1:<f1..f5>` (rank weights), `m2:<g1..g4>` (distance weights),
//! `m3` (globally fitted weights) and `localreg` (regression on the
//! neighbouring trajectories).

mod pipeline;

pub use pipeline::{
    forecast_hourly, HourlyForecaster, HourlyModelBank, HyperParams, SimilarityForecaster,
};

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::neighbors::{CandidateSet, Trajectories};
use crate::registry::{expect_args, Registry};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointForecast {
    pub value: f64,
    /// The underlying least-squares solve needed the ridge fallback.
    pub regularized: bool,
}

impl PointForecast {
    pub fn plain(value: f64) -> Self {
        Self {
            value,
            regularized: false,
        }
    }
}

/// What an aggregator may look at for one query.
#[derive(Debug, Clone, Copy)]
pub struct AggregationInput<'a> {
    pub trajectories: &'a Trajectories<'a>,
    pub query: usize,
    pub candidates: &'a CandidateSet,
}

pub trait Aggregator: Send + Sync + fmt::Debug {
    fn spec(&self) -> String;

    /// Model family: `mean`, `m1`, `m2`, `m3` or `localreg`.
    fn family(&self) -> &'static str;

    /// Weight function id (`f1`…`f5`, `g1`…`g4`) when the family has one.
    fn weight_fn(&self) -> Option<&'static str> {
        None
    }

    fn needs_training(&self) -> bool {
        false
    }

    /// Fits on `(candidates, actual)` pairs from the tune queries.
    fn train(&mut self, _examples: &[(CandidateSet, f64)]) -> Result<()> {
        Ok(())
    }

    fn aggregate(&self, input: &AggregationInput<'_>) -> Result<PointForecast>;
}

fn non_empty(candidates: &CandidateSet) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    Ok(())
}

pub fn forecast_mean(candidates: &CandidateSet) -> Result<f64> {
    non_empty(candidates)?;
    let sum: f64 = candidates.entries.iter().map(|c| c.value).sum();
    Ok(sum / candidates.len() as f64)
}

/// Non-decreasing rank weight families for `m1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RankFn {
    /// 1
    F1,
    /// x
    F2,
    /// √x
    F3,
    /// ln(1 + x)
    F4,
    /// ln²(1 + x)
    F5,
}

impl RankFn {
    pub const ALL: [RankFn; 5] = [RankFn::F1, RankFn::F2, RankFn::F3, RankFn::F4, RankFn::F5];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            RankFn::F1 => 1.0,
            RankFn::F2 => x,
            RankFn::F3 => x.sqrt(),
            RankFn::F4 => x.ln_1p(),
            RankFn::F5 => x.ln_1p().powi(2),
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            RankFn::F1 => "f1",
            RankFn::F2 => "f2",
            RankFn::F3 => "f3",
            RankFn::F4 => "f4",
            RankFn::F5 => "f5",
        }
    }
}

impl FromStr for RankFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RankFn::ALL
            .into_iter()
            .find(|f| f.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown rank weight function `{s}`")))
    }
}

/// Positive decreasing distance weight families for `m2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DistanceFn {
    /// 1 / (x + 0.01)
    G1,
    /// 1 / (√x + 0.01)
    G2,
    /// 1 / (x√x + 0.01)
    G3,
    /// 1 / (x² + 0.01)
    G4,
}

impl DistanceFn {
    pub const ALL: [DistanceFn; 4] = [DistanceFn::G1, DistanceFn::G2, DistanceFn::G3, DistanceFn::G4];

    pub fn eval(self, x: f64) -> f64 {
        let den = match self {
            DistanceFn::G1 => x,
            DistanceFn::G2 => x.sqrt(),
            DistanceFn::G3 => x * x.sqrt(),
            DistanceFn::G4 => x * x,
        };
        1.0 / (den + 0.01)
    }

    pub fn id(self) -> &'static str {
        match self {
            DistanceFn::G1 => "g1",
            DistanceFn::G2 => "g2",
            DistanceFn::G3 => "g3",
            DistanceFn::G4 => "g4",
        }
    }
}

impl FromStr for DistanceFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DistanceFn::ALL
            .into_iter()
            .find(|g| g.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown distance weight function `{s}`")))
    }
}

/// `m1` weights `w_s = f(K − s + 1) / Σ f(x)` for `s = 1..=k`.
pub fn rank_weights(k: usize, f: RankFn) -> Vec<f64> {
    let total: f64 = (1..=k).map(|x| f.eval(x as f64)).sum();
    (1..=k).map(|s| f.eval((k - s + 1) as f64) / total).collect()
}

/// `m1`: rank-weighted mean with the nearest candidate ranked first.
pub fn forecast_rank_weighted(candidates: &CandidateSet, f: RankFn) -> Result<f64> {
    non_empty(candidates)?;
    let k = candidates.len();
    let num: f64 = candidates
        .entries
        .iter()
        .enumerate()
        .map(|(s, c)| f.eval((k - s) as f64) * c.value)
        .sum();
    let den: f64 = (1..=k).map(|x| f.eval(x as f64)).sum();
    Ok(num / den)
}

/// `m2` weights `g(d_s) / Σ g(d)`.
pub fn distance_weights(distances: &[f64], g: DistanceFn) -> Vec<f64> {
    let raw: Vec<f64> = distances.iter().map(|&d| g.eval(d)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// `m2`: distance-weighted mean.
pub fn forecast_distance_weighted(candidates: &CandidateSet, g: DistanceFn) -> Result<f64> {
    non_empty(candidates)?;
    let (mut num, mut den) = (0.0, 0.0);
    for c in &candidates.entries {
        let w = g.eval(c.distance);
        num += w * c.value;
        den += w;
    }
    Ok(num / den)
}

/// `m3` weights: one per neighbour rank plus an intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalWeights {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub regularized: bool,
}

impl GlobalWeights {
    pub fn k(&self) -> usize {
        self.weights.len()
    }
}

/// Least-squares fit of `actual ≈ Σ w_s · value_s + w_{K+1}` over tune
/// queries, candidates ordered nearest first.
pub fn fit_global_weights(examples: &[(CandidateSet, f64)], k: usize) -> Result<GlobalWeights> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if examples.len() < k + 2 {
        return Err(Error::insufficient(format!(
            "global weights for K={k} need at least {} tune queries, got {}",
            k + 2,
            examples.len()
        )));
    }
    let mut rows = Vec::with_capacity(examples.len());
    let mut targets = Vec::with_capacity(examples.len());
    for (c, actual) in examples {
        if c.len() != k {
            return Err(Error::LengthMismatch {
                expected: k,
                found: c.len(),
            });
        }
        let mut row = c.values();
        row.push(1.0);
        rows.push(row);
        targets.push(*actual);
    }
    let fit = least_squares(rows.iter().map(Vec::as_slice), &targets, k + 1)?;
    let mut weights = fit.coefficients;
    let intercept = weights.pop().unwrap_or_default();
    Ok(GlobalWeights {
        weights,
        intercept,
        regularized: fit.regularized,
    })
}

pub fn forecast_global(candidates: &CandidateSet, w: &GlobalWeights) -> Result<f64> {
    if candidates.len() != w.k() {
        return Err(Error::LengthMismatch {
            expected: w.k(),
            found: candidates.len(),
        });
    }
    let dot: f64 = candidates
        .entries
        .iter()
        .zip(&w.weights)
        .map(|(c, w)| c.value * w)
        .sum();
    Ok(dot + w.intercept)
}

/// Regresses candidate targets on their trajectories (plus intercept) and
/// evaluates the fit at the query trajectory.
pub fn forecast_local_regression(
    trajectories: &Trajectories<'_>,
    query: usize,
    candidates: &CandidateSet,
) -> Result<PointForecast> {
    non_empty(candidates)?;
    let l = trajectories.window_len();
    let rows: Vec<Vec<f64>> = candidates
        .entries
        .iter()
        .map(|c| {
            let mut row = trajectories.window_of(c.source).to_vec();
            row.push(1.0);
            row
        })
        .collect();
    let fit = least_squares(rows.iter().map(Vec::as_slice), &candidates.values(), l + 1)?;
    let q = trajectories.window_of(query);
    let value = q
        .iter()
        .zip(&fit.coefficients)
        .map(|(x, w)| x * w)
        .sum::<f64>()
        + fit.coefficients[l];
    if !value.is_finite() {
        return Err(Error::Solve("non-finite local regression forecast".into()));
    }
    Ok(PointForecast {
        value,
        regularized: fit.regularized,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mean;

impl Aggregator for Mean {
    fn spec(&self) -> String {
        "mean".into()
    }

    fn family(&self) -> &'static str {
        "mean"
    }

    fn aggregate(&self, input: &AggregationInput<'_>) -> Result<PointForecast> {
        forecast_mean(input.candidates).map(PointForecast::plain)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankWeighted(pub RankFn);

impl Aggregator for RankWeighted {
    fn spec(&self) -> String {
        format!("m1:{}", self.0.id())
    }

    fn family(&self) -> &'static str {
        "m1"
    }

    fn weight_fn(&self) -> Option<&'static str> {
        Some(self.0.id())
    }

    fn aggregate(&self, input: &AggregationInput<'_>) -> Result<PointForecast> {
        forecast_rank_weighted(input.candidates, self.0).map(PointForecast::plain)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistanceWeighted(pub DistanceFn);

impl Aggregator for DistanceWeighted {
    fn spec(&self) -> String {
        format!("m2:{}", self.0.id())
    }

    fn family(&self) -> &'static str {
        "m2"
    }

    fn weight_fn(&self) -> Option<&'static str> {
        Some(self.0.id())
    }

    fn aggregate(&self, input: &AggregationInput<'_>) -> Result<PointForecast> {
        forecast_distance_weighted(input.candidates, self.0).map(PointForecast::plain)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Global {
    weights: Option<GlobalWeights>,
}

impl Global {
    pub fn weights(&self) -> Option<&GlobalWeights> {
        self.weights.as_ref()
    }
}

impl Aggregator for Global {
    fn spec(&self) -> String {
        "m3".into()
    }

    fn family(&self) -> &'static str {
        "m3"
    }

    fn needs_training(&self) -> bool {
        true
    }

    fn train(&mut self, examples: &[(CandidateSet, f64)]) -> Result<()> {
        let k = examples
            .first()
            .map(|(c, _)| c.len())
            .ok_or_else(|| Error::insufficient("no tune queries to fit global weights"))?;
        self.weights = Some(fit_global_weights(examples, k)?);
        Ok(())
    }

    fn aggregate(&self, input: &AggregationInput<'_>) -> Result<PointForecast> {
        let w = self
            .weights
            .as_ref()
            .ok_or_else(|| Error::invalid("m3 used before training"))?;
        Ok(PointForecast {
            value: forecast_global(input.candidates, w)?,
            regularized: w.regularized,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalRegression;

impl Aggregator for LocalRegression {
    fn spec(&self) -> String {
        "localreg".into()
    }

    fn family(&self) -> &'static str {
        "localreg"
    }

    fn aggregate(&self, input: &AggregationInput<'_>) -> Result<PointForecast> {
        forecast_local_regression(input.trajectories, input.query, input.candidates)
    }
}

pub fn registry() -> Registry<dyn Aggregator> {
    let mut reg: Registry<dyn Aggregator> = Registry::new("aggregator");
    reg.register("mean", |a, _| {
        expect_args("mean", a, 0)?;
        Ok(Box::new(Mean))
    })
    .register("m1", |a, _| {
        expect_args("m1", a, 1)?;
        Ok(Box::new(RankWeighted(a[0].parse()?)))
    })
    .register("m2", |a, _| {
        expect_args("m2", a, 1)?;
        Ok(Box::new(DistanceWeighted(a[0].parse()?)))
    })
    .register("m3", |a, _| {
        expect_args("m3", a, 0)?;
        Ok(Box::new(Global::default()))
    })
    .register("localreg", |a, _| {
        expect_args("localreg", a, 0)?;
        Ok(Box::new(LocalRegression))
    });
    reg
}

pub fn parse(spec: &str) -> Result<Box<dyn Aggregator>> {
    static BUILTIN: OnceLock<Registry<dyn Aggregator>> = OnceLock::new();
    BUILTIN.get_or_init(registry).create(spec)
}
