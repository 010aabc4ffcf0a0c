//! Prediction intervals: the sample quantile, historical simulation (HS,
//! HS-S), similarity-trajectory quantiles (ST, ST-S, hourly ST) and
//! model-dependent similarity trajectories (MDST, MDST-S).
//!
//! Model errors are `ε = F − X`. Error-based intervals are therefore
//! `[F − ε(1 − α/2), F − ε(α/2)]`, i.e. `F` plus quantiles of `X − F`.

use std::fmt;
use std::sync::OnceLock;

use crate::dataset::{Members, ReferenceSet};
use crate::distances::{self, Distance};
use crate::error::{Error, Result};
use crate::forecaster::{EvalContext, Forecaster};
use crate::ingestion::SLOTS_PER_DAY;
use crate::neighbors::{k_nearest, seasonal_filter, CandidateSet, Trajectories};
use crate::pointcast::{HyperParams, SimilarityForecaster};
use crate::registry::{parse_arg, Registry};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionInterval {
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
}

impl PredictionInterval {
    pub fn new(lower: f64, upper: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(lower <= upper) {
            return Err(Error::invalid(format!("interval bounds out of order: [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper, alpha })
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Closed-interval coverage.
    pub fn covers(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("α must lie in (0, 1), got {alpha}")))
    }
}

/// Quantile `q` of `sample`: the `q(N+1)`-th order statistic, linearly
/// interpolated between neighbours, with indices clamped to `[1, N]`.
pub fn sample_quantile(sample: &[f64], q: f64) -> Result<f64> {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted_quantile(&sorted, q)
}

fn sorted_quantile(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::insufficient("quantile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::invalid(format!("quantile level {q} outside [0, 1]")));
    }
    let n = sorted.len();
    let mut pos = q * (n + 1) as f64;
    // q = i/(N+1) should land on a_i despite rounding in the product
    if (pos - pos.round()).abs() <= 1e-9 {
        pos = pos.round();
    }
    let lo = pos.floor();
    let frac = pos - lo;
    let at = |i: f64| sorted[(i as usize).clamp(1, n) - 1];
    if frac == 0.0 {
        return Ok(at(lo));
    }
    // c1·a + c2·b written as a + c2·(b − a): monotone in q and exact when a = b
    let (a, b) = (at(lo), at(lo + 1.0));
    Ok(a + frac * (b - a))
}

/// `[Q(α/2), Q(1 − α/2)]` of the candidate values.
pub fn st_interval(candidates: &CandidateSet, alpha: f64) -> Result<PredictionInterval> {
    check_alpha(alpha)?;
    if candidates.len() < 2 {
        return Err(Error::insufficient(format!(
            "ST interval needs at least 2 candidates, got {}",
            candidates.len()
        )));
    }
    let mut v = candidates.values();
    v.sort_by(f64::total_cmp);
    PredictionInterval::new(
        sorted_quantile(&v, alpha / 2.0)?,
        sorted_quantile(&v, 1.0 - alpha / 2.0)?,
        alpha,
    )
}

/// Interval around `forecast` from a window of past errors `ε = F − X`.
pub fn hs_interval(forecast: f64, errors: &[f64], alpha: f64) -> Result<PredictionInterval> {
    check_alpha(alpha)?;
    if errors.len() < 2 {
        return Err(Error::insufficient(format!(
            "error-based interval needs at least 2 errors, got {}",
            errors.len()
        )));
    }
    let mut e = errors.to_vec();
    e.sort_by(f64::total_cmp);
    PredictionInterval::new(
        forecast - sorted_quantile(&e, 1.0 - alpha / 2.0)?,
        forecast - sorted_quantile(&e, alpha / 2.0)?,
        alpha,
    )
}

/// Forecast errors `ε_t = F_t − X_t` indexed by observation (1-based).
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSeries {
    first: usize,
    start_slot: usize,
    values: Vec<Option<f64>>,
}

impl ErrorSeries {
    /// `values[0]` is the error of observation `first`, whose slot of day
    /// is `start_slot`.
    pub fn new(first: usize, start_slot: usize, values: Vec<Option<f64>>) -> Self {
        Self {
            first: first.max(1),
            start_slot: start_slot % SLOTS_PER_DAY,
            values,
        }
    }

    pub fn from_forecasts(
        first: usize,
        start_slot: usize,
        forecasts: &[Option<f64>],
        actuals: &[f64],
    ) -> Self {
        let values = forecasts
            .iter()
            .zip(actuals)
            .map(|(f, x)| f.map(|f| f - x))
            .collect();
        Self::new(first, start_slot, values)
    }

    pub fn first(&self) -> usize {
        self.first
    }

    /// Last observation index covered.
    pub fn last(&self) -> usize {
        self.first + self.values.len() - 1
    }

    pub fn get(&self, t: usize) -> Option<f64> {
        t.checked_sub(self.first).and_then(|i| self.values.get(i).copied().flatten())
    }

    /// Defined errors among observations `t − n + 1 ..= t`.
    pub fn recent(&self, t: usize, n: usize) -> Vec<f64> {
        (t.saturating_sub(n - 1).max(1)..=t).filter_map(|i| self.get(i)).collect()
    }

    /// Defined errors at `t − period·j` for `j = 0..n`.
    pub fn same_slot(&self, t: usize, period: usize, n: usize) -> Vec<f64> {
        (0..n)
            .map_while(|j| t.checked_sub(period * j))
            .filter(|&i| i >= 1)
            .filter_map(|i| self.get(i))
            .collect()
    }

    /// Errors as a dense array with NaN for gaps.
    fn dense(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect()
    }
}

/// Window of errors that an HS interval for `target` may use: the `len`
/// errors ending at the forecast origin `target − step`, or with `seasonal`
/// the errors at the same slot on each of the `len` previous days.
pub fn hs_window(errors: &ErrorSeries, target: usize, step: usize, len: usize, seasonal: bool) -> Result<Vec<f64>> {
    if len == 0 {
        return Err(Error::invalid("HS window length must be at least 1"));
    }
    if seasonal {
        if step > SLOTS_PER_DAY {
            return Err(Error::invalid("seasonal HS needs a step of at most one day"));
        }
        let anchor = target.checked_sub(SLOTS_PER_DAY).ok_or_else(|| {
            Error::insufficient(format!("observation {target} has no previous day"))
        })?;
        Ok(errors.same_slot(anchor, SLOTS_PER_DAY, len))
    } else {
        let origin = target.checked_sub(step).filter(|o| *o >= 1).ok_or_else(|| {
            Error::insufficient(format!("observation {target} has no forecast origin"))
        })?;
        Ok(errors.recent(origin, len))
    }
}

/// Settings of an MDST search over error trajectories.
#[derive(Debug)]
pub struct MdstParams {
    pub window: usize,
    pub k: usize,
    pub radius: Option<usize>,
    pub distance: Box<dyn Distance>,
}

/// Candidate next-errors for `target`: k-NN over error trajectories whose
/// next error is known at the forecast origin `target − step`.
pub fn mdst_candidates(
    errors: &ErrorSeries,
    target: usize,
    step: usize,
    params: &MdstParams,
) -> Result<CandidateSet> {
    let l = params.window;
    if l < 2 || params.k < 2 {
        return Err(Error::invalid("MDST needs L ≥ 2 and K ≥ 2"));
    }
    let offset = l + step - 1;
    if target < errors.first() + offset || target > errors.last() + step {
        return Err(Error::insufficient(format!(
            "observation {target} lacks a length-{l} error history"
        )));
    }
    let dense = errors.dense();
    // 1-based start of the query error trajectory within `dense`
    let query = target - offset - errors.first() + 1;
    let traj = Trajectories::new(&dense, errors.start_slot, l, step);
    if traj.window_of(query).iter().any(|e| e.is_nan()) {
        return Err(Error::insufficient(format!(
            "error trajectory before observation {target} has gaps"
        )));
    }
    let mut reference = ReferenceSet::range(query, 1, query.saturating_sub(step));
    if let Some(r) = params.radius {
        let slot = (errors.start_slot + target - errors.first()) % SLOTS_PER_DAY;
        reference = seasonal_filter(&traj, &reference, slot, r)?;
    }
    let complete: Vec<usize> = reference
        .iter()
        .filter(|&i| !traj.target_of(i).is_nan() && traj.window_of(i).iter().all(|e| !e.is_nan()))
        .collect();
    let reference = ReferenceSet {
        query,
        members: Members::List(complete),
    };
    let found = k_nearest(&traj, query, &reference, params.distance.as_ref(), params.k)?;
    if found.len() < 2 {
        return Err(Error::insufficient("MDST found fewer than 2 error trajectories"));
    }
    Ok(found)
}

pub fn mdst_interval(
    forecast: f64,
    errors: &ErrorSeries,
    target: usize,
    step: usize,
    params: &MdstParams,
    alpha: f64,
) -> Result<PredictionInterval> {
    let c = mdst_candidates(errors, target, step, params)?;
    hs_interval(forecast, &c.values(), alpha)
}

/// Inputs available when building the interval of one target.
#[derive(Debug, Clone, Copy)]
pub struct IntervalContext<'a> {
    pub eval: EvalContext<'a>,
    pub errors: &'a ErrorSeries,
    pub model: &'a dyn Forecaster,
    pub alpha: f64,
}

pub trait IntervalMethod: Send + Sync + fmt::Debug {
    fn spec(&self) -> String;

    /// Observations before the first query whose model errors are needed.
    fn error_history(&self, _step: usize) -> usize {
        0
    }

    fn interval(&self, ctx: &IntervalContext<'_>, target: usize, forecast: f64) -> Result<PredictionInterval>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistoricalSimulation {
    pub window: usize,
    pub seasonal: bool,
}

impl HistoricalSimulation {
    pub const DEFAULT_WINDOW: usize = 60;
}

impl IntervalMethod for HistoricalSimulation {
    fn spec(&self) -> String {
        let name = if self.seasonal { "hs-s" } else { "hs" };
        format!("{name}:{}", self.window)
    }

    fn error_history(&self, step: usize) -> usize {
        if self.seasonal {
            SLOTS_PER_DAY * self.window
        } else {
            self.window + step - 1
        }
    }

    fn interval(&self, ctx: &IntervalContext<'_>, target: usize, forecast: f64) -> Result<PredictionInterval> {
        let window = hs_window(ctx.errors, target, ctx.model.step(), self.window, self.seasonal)?;
        hs_interval(forecast, &window, ctx.alpha)
    }
}

/// Quantiles of the candidates of a dedicated similarity search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarityQuantiles {
    pub window: usize,
    pub k: usize,
    pub radius: Option<usize>,
    pub distance: String,
}

impl SimilarityQuantiles {
    pub fn plain() -> Self {
        Self { window: 9, k: 60, radius: None, distance: "weuclidean".into() }
    }

    pub fn seasonal() -> Self {
        Self { window: 4, k: 150, radius: Some(5), distance: "weuclidean".into() }
    }

    fn search(&self, step: usize) -> Result<SimilarityForecaster> {
        SimilarityForecaster::new(HyperParams {
            distance: self.distance.clone(),
            window: self.window,
            k: self.k,
            radius: self.radius,
            outlier: "none".into(),
            aggregator: "mean".into(),
            step,
        })
    }
}

impl IntervalMethod for SimilarityQuantiles {
    fn spec(&self) -> String {
        match self.radius {
            Some(r) => format!("st-s:{}:{}:{r}", self.window, self.k),
            None => format!("st:{}:{}", self.window, self.k),
        }
    }

    fn interval(&self, ctx: &IntervalContext<'_>, target: usize, _forecast: f64) -> Result<PredictionInterval> {
        let c = self.search(ctx.model.step())?.candidates_for(&ctx.eval, target)?;
        st_interval(&c, ctx.alpha)
    }
}

/// ST quantiles of the point model's own candidates, so an hourly bank
/// yields hour-specific intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelCandidateQuantiles;

impl IntervalMethod for ModelCandidateQuantiles {
    fn spec(&self) -> String {
        "st-hourly".into()
    }

    fn interval(&self, ctx: &IntervalContext<'_>, target: usize, _forecast: f64) -> Result<PredictionInterval> {
        let c = ctx
            .model
            .candidates(&ctx.eval, target)
            .ok_or_else(|| Error::invalid("st-hourly needs a similarity point model"))??;
        st_interval(&c, ctx.alpha)
    }
}

#[derive(Debug)]
pub struct Mdst {
    pub params: MdstParams,
    /// Days of error history computed before the first query.
    pub history_days: usize,
}

impl Mdst {
    pub const DEFAULT_DAYS: usize = 28;

    pub fn new(window: usize, k: usize, radius: Option<usize>, history_days: usize) -> Result<Self> {
        if window < 2 || k < 2 || history_days == 0 {
            return Err(Error::invalid("MDST needs L ≥ 2, K ≥ 2 and at least one day of history"));
        }
        if let Some(r) = radius {
            crate::neighbors::SeasonalFilter::new(r)?;
        }
        Ok(Self {
            params: MdstParams {
                window,
                k,
                radius,
                distance: distances::parse("weuclidean")?,
            },
            history_days,
        })
    }
}

impl IntervalMethod for Mdst {
    fn spec(&self) -> String {
        let p = &self.params;
        match p.radius {
            Some(r) => format!("mdst-s:{}:{}:{r}:{}", p.window, p.k, self.history_days),
            None => format!("mdst:{}:{}:{}", p.window, p.k, self.history_days),
        }
    }

    fn error_history(&self, _step: usize) -> usize {
        self.history_days * SLOTS_PER_DAY
    }

    fn interval(&self, ctx: &IntervalContext<'_>, target: usize, forecast: f64) -> Result<PredictionInterval> {
        mdst_interval(forecast, ctx.errors, target, ctx.model.step(), &self.params, ctx.alpha)
    }
}

fn args_or<const N: usize>(kind: &str, args: &[&str], defaults: [usize; N], min: usize) -> Result<[usize; N]> {
    if args.len() > N || (!args.is_empty() && args.len() < min) {
        return Err(Error::invalid(format!("{kind}: expected {min} to {N} arguments, got {}", args.len())));
    }
    let mut out = defaults;
    for (slot, raw) in out.iter_mut().zip(args) {
        *slot = parse_arg(kind, "argument", raw)?;
    }
    Ok(out)
}

/// Interval methods: `hs[:L]`, `hs-s[:L]`, `st[:L:K]`, `st-s[:L:K:R]`,
/// `st-hourly`, `mdst[:L:K[:days]]`, `mdst-s[:L:K:R[:days]]`.
pub fn registry() -> Registry<dyn IntervalMethod> {
    let mut reg: Registry<dyn IntervalMethod> = Registry::new("interval method");
    reg.register("hs", |a, _| {
        let [window] = args_or("hs", a, [HistoricalSimulation::DEFAULT_WINDOW], 1)?;
        Ok(Box::new(HistoricalSimulation { window, seasonal: false }))
    })
    .register("hs-s", |a, _| {
        let [window] = args_or("hs-s", a, [HistoricalSimulation::DEFAULT_WINDOW], 1)?;
        Ok(Box::new(HistoricalSimulation { window, seasonal: true }))
    })
    .register("st", |a, _| {
        let d = SimilarityQuantiles::plain();
        let [window, k] = args_or("st", a, [d.window, d.k], 2)?;
        Ok(Box::new(SimilarityQuantiles { window, k, ..d }))
    })
    .register("st-s", |a, _| {
        let d = SimilarityQuantiles::seasonal();
        let [window, k, r] = args_or("st-s", a, [d.window, d.k, d.radius.unwrap_or(5)], 3)?;
        crate::neighbors::SeasonalFilter::new(r)?;
        Ok(Box::new(SimilarityQuantiles { window, k, radius: Some(r), ..d }))
    })
    .register("st-hourly", |a, _| {
        args_or::<0>("st-hourly", a, [], 0)?;
        Ok(Box::new(ModelCandidateQuantiles))
    })
    .register("mdst", |a, _| {
        let [window, k, days] = args_or("mdst", a, [8, 220, Mdst::DEFAULT_DAYS], 2)?;
        Ok(Box::new(Mdst::new(window, k, None, days)?))
    })
    .register("mdst-s", |a, _| {
        let [window, k, r, days] = args_or("mdst-s", a, [8, 220, 6, Mdst::DEFAULT_DAYS], 3)?;
        Ok(Box::new(Mdst::new(window, k, Some(r), days)?))
    });
    reg
}

pub fn parse(spec: &str) -> Result<Box<dyn IntervalMethod>> {
    static BUILTIN: OnceLock<Registry<dyn IntervalMethod>> = OnceLock::new();
    BUILTIN.get_or_init(registry).create(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neighbors::Candidate;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn cands(values: &[f64]) -> CandidateSet {
        CandidateSet {
            entries: values
                .iter()
                .enumerate()
                .map(|(i, &value)| Candidate { value, distance: i as f64, source: i + 1 })
                .collect(),
            k: values.len(),
        }
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(sample_quantile(&[10.0, 20.0, 30.0], 0.5).unwrap(), 20.0);
        assert_eq!(sample_quantile(&[1.0, 2.0, 3.0, 4.0], 0.25).unwrap(), 1.25);
        assert_eq!(sample_quantile(&[4.0, 1.0, 3.0, 2.0], 0.95).unwrap(), 4.0);
        assert_eq!(sample_quantile(&[4.0, 1.0, 3.0, 2.0], 0.01).unwrap(), 1.0);
        assert!(sample_quantile(&[], 0.5).is_err());
    }

    #[test]
    fn st_examples() {
        let c = cands(&(1..=19).map(f64::from).collect::<Vec<_>>());
        let pi = st_interval(&c, 0.10).unwrap();
        assert_eq!((pi.lower, pi.upper), (1.0, 19.0));
        let flat = st_interval(&cands(&[7.0; 5]), 0.05).unwrap();
        assert_eq!(flat.width(), 0.0);
        let wide = st_interval(&cands(&[3.0, 9.0, 1.0, 5.0]), 1e-6).unwrap();
        assert_eq!((wide.lower, wide.upper), (1.0, 9.0));
        assert!(st_interval(&cands(&[1.0]), 0.1).is_err());
    }

    #[test]
    fn hs_examples() {
        let pi = hs_interval(100.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1.0 / 3.0).unwrap();
        assert_eq!((pi.lower, pi.upper), (98.0, 102.0));
        let flat = hs_interval(55.0, &[0.0; 10], 0.05).unwrap();
        assert_eq!((flat.lower, flat.upper), (55.0, 55.0));
        assert!(hs_interval(1.0, &[0.5], 0.1).is_err());
    }

    #[test]
    fn hs_uses_actual_minus_forecast_orientation() {
        // forecasts always 5 too high: actual = F − 5
        let pi = hs_interval(100.0, &[5.0; 20], 0.1).unwrap();
        assert_eq!((pi.lower, pi.upper), (95.0, 95.0));
    }

    #[test]
    fn hs_windows() {
        let errs = ErrorSeries::new(1, 0, (1..=400).map(|i| Some(i as f64)).collect());
        assert_eq!(hs_window(&errs, 101, 1, 3, false).unwrap(), vec![98.0, 99.0, 100.0]);
        assert_eq!(hs_window(&errs, 101, 2, 3, false).unwrap(), vec![97.0, 98.0, 99.0]);
        let s = hs_window(&errs, 300, 1, 5, true).unwrap();
        assert_eq!(s, vec![204.0, 108.0, 12.0]);
    }

    #[test]
    fn mdst_zero_errors_collapse() {
        let errs = ErrorSeries::new(1, 0, vec![Some(0.0); 500]);
        let params = MdstParams { window: 8, k: 20, radius: None, distance: distances::parse("weuclidean").unwrap() };
        let pi = mdst_interval(80.0, &errs, 450, 1, &params, 0.05).unwrap();
        assert_eq!((pi.lower, pi.upper), (80.0, 80.0));
    }

    #[test]
    fn mdst_periodic_errors_collapse_to_next_error() {
        let pattern: Vec<f64> = (0..96).map(|i| ((i * 37) % 23) as f64 - 11.0).collect();
        let errs = ErrorSeries::new(1, 0, (0..96 * 10).map(|i| Some(pattern[i % 96])).collect());
        let params = MdstParams { window: 6, k: 5, radius: Some(0), distance: distances::parse("weuclidean").unwrap() };
        let target = 96 * 9 + 40;
        let next = pattern[(target - 1) % 96];
        let pi = mdst_interval(200.0, &errs, target, 1, &params, 0.05).unwrap();
        assert_eq!((pi.lower, pi.upper), (200.0 - next, 200.0 - next));
    }

    #[test]
    fn mdst_never_uses_errors_after_origin() {
        let mut values: Vec<Option<f64>> = (0..300).map(|i| Some((i % 7) as f64)).collect();
        let target = 250;
        for v in values.iter_mut().skip(target - 2) {
            *v = Some(1e9);
        }
        let errs = ErrorSeries::new(1, 0, values);
        let params = MdstParams { window: 4, k: 50, radius: None, distance: distances::parse("euclidean").unwrap() };
        let c = mdst_candidates(&errs, target, 2, &params).unwrap();
        assert!(c.values().iter().all(|&v| v < 1e9));
        assert!(c.entries.iter().all(|e| e.source + 4 - 1 + 2 <= 248));
    }

    #[test]
    fn registry_defaults() {
        assert_eq!(parse("hs").unwrap().spec(), "hs:60");
        assert_eq!(parse("st").unwrap().spec(), "st:9:60");
        assert_eq!(parse("st-s").unwrap().spec(), "st-s:4:150:5");
        assert_eq!(parse("mdst").unwrap().spec(), "mdst:8:220:28");
        assert_eq!(parse("mdst-s").unwrap().spec(), "mdst-s:8:220:6:28");
        assert_eq!(parse("st-s:5:40:2").unwrap().spec(), "st-s:5:40:2");
        assert!(parse("st:9").is_err());
        assert!(parse("st-hourly:3").is_err());
        assert!(parse("mdst-s:8:220:70").is_err());
    }

    #[test]
    fn hs_coverage_on_gaussian_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(0.0, 10.0).unwrap();
        let errors: Vec<f64> = (0..5500).map(|_| normal.sample(&mut rng)).collect();
        let mut covered = 0;
        for t in 500..5500 {
            let pi = hs_interval(0.0, &errors[t - 500..t], 0.05).unwrap();
            // actual = F − ε
            if pi.covers(-errors[t]) {
                covered += 1;
            }
        }
        let uc = covered as f64 / 5000.0;
        assert!((0.93..=0.97).contains(&uc), "coverage {uc}");
    }

    proptest! {
        #[test]
        fn quantile_hits_order_statistics(mut v in prop::collection::vec(-1e3f64..1e3, 1..50)) {
            v.sort_by(f64::total_cmp);
            let n = v.len();
            for i in 1..=n {
                let q = i as f64 / (n + 1) as f64;
                prop_assert_eq!(sample_quantile(&v, q).unwrap(), v[i - 1]);
            }
        }

        #[test]
        fn quantile_is_monotone(v in prop::collection::vec(-1e3f64..1e3, 1..60), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(sample_quantile(&v, lo).unwrap() <= sample_quantile(&v, hi).unwrap());
        }

        #[test]
        fn widths_shrink_as_alpha_grows(v in prop::collection::vec(-1e3f64..1e3, 2..80), a in 0.01f64..0.5, d in 0.0f64..0.4) {
            let (a1, a2) = (a, a + d);
            let c = cands(&v);
            let (w1, w2) = (st_interval(&c, a1).unwrap().width(), st_interval(&c, a2).unwrap().width());
            prop_assert!(w1 >= 0.0 && w2 <= w1 + 1e-9);
            let (h1, h2) = (hs_interval(5.0, &v, a1).unwrap().width(), hs_interval(5.0, &v, a2).unwrap().width());
            prop_assert!(h1 >= 0.0 && h2 <= h1 + 1e-9);
        }

        #[test]
        fn symmetric_errors_give_symmetric_interval(half in prop::collection::vec(0.0f64..100.0, 1..40), f in -500.0f64..500.0, alpha in 0.01f64..0.9) {
            let mut e: Vec<f64> = half.iter().flat_map(|&x| [x, -x]).collect();
            e.push(0.0);
            let pi = hs_interval(f, &e, alpha).unwrap();
            prop_assert!(((pi.upper - f) - (f - pi.lower)).abs() <= 1e-12 * f.abs().max(100.0));
        }
    }

    #[test]
    fn symmetric_errors_example() {
        let pi = hs_interval(10.0, &[-3.0, -1.0, 0.0, 1.0, 3.0], 0.2).unwrap();
        assert_abs_diff_eq!(pi.upper - 10.0, 10.0 - pi.lower, epsilon = 1e-12);
    }
}
