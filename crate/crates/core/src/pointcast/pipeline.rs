use std::fmt;

use rayon::prelude::*;

use super::{AggregationInput, Aggregator, PointForecast};
use crate::dataset::ReferenceSet;
use crate::distances::{self, Distance};
use crate::error::{Error, Result};
use crate::forecaster::{EvalContext, Forecaster};
use crate::neighbors::{k_nearest, seasonal_filter, CandidateSet, Trajectories};
use crate::outliers::{self, OutlierPolicy};

/// One point in the similarity model's hyperparameter space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HyperParams {
    pub distance: String,
    pub window: usize,
    pub k: usize,
    /// Seasonal filter radius in slots; `None` disables the filter.
    pub radius: Option<usize>,
    pub outlier: String,
    pub aggregator: String,
    pub step: usize,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            distance: "weuclidean".into(),
            window: 14,
            k: 25,
            radius: None,
            outlier: "none".into(),
            aggregator: "mean".into(),
            step: 1,
        }
    }
}

impl HyperParams {
    /// Defaults of the seasonal single model.
    pub fn seasonal() -> Self {
        Self {
            window: 10,
            k: 25,
            radius: Some(3),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::invalid(format!("L must be at least 2, got {}", self.window)));
        }
        if self.k == 0 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if self.step == 0 {
            return Err(Error::invalid("step h must be at least 1"));
        }
        SimilarityForecaster::new(self.clone()).map(|_| ())
    }
}

impl fmt::Display for HyperParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.aggregator)?;
        if let Some(r) = self.radius {
            write!(f, "+seasonal:{r}")?;
        }
        write!(
            f,
            "/distance={}/L={}/K={}/outlier={}",
            self.distance, self.window, self.k, self.outlier
        )?;
        if self.step != 1 {
            write!(f, "/h={}", self.step)?;
        }
        Ok(())
    }
}

/// Trajectory k-NN forecaster: reference set, optional seasonal filter,
/// K nearest, outlier policy, aggregation.
#[derive(Debug)]
pub struct SimilarityForecaster {
    params: HyperParams,
    distance: Box<dyn Distance>,
    outlier: Box<dyn OutlierPolicy>,
    aggregator: Box<dyn Aggregator>,
}

impl SimilarityForecaster {
    pub fn new(params: HyperParams) -> Result<Self> {
        let distance = distances::parse(&params.distance)?;
        distance.check_window(params.window)?;
        if let Some(r) = params.radius {
            crate::neighbors::SeasonalFilter::new(r)?;
        }
        Ok(Self {
            outlier: outliers::parse(&params.outlier)?,
            aggregator: super::parse(&params.aggregator)?,
            distance,
            params,
        })
    }

    pub fn params(&self) -> &HyperParams {
        &self.params
    }

    pub fn aggregator(&self) -> &dyn Aggregator {
        self.aggregator.as_ref()
    }

    pub fn trajectories<'a>(&self, ctx: &EvalContext<'a>) -> Trajectories<'a> {
        Trajectories::from_series(ctx.series, self.params.window, self.params.step)
    }

    /// Eligible neighbours for `target`, after the seasonal filter.
    pub fn reference(&self, ctx: &EvalContext<'_>, target: usize) -> Result<ReferenceSet> {
        let p = &self.params;
        let reference = ctx.plan.reference_for_target(target, p.window, p.step)?;
        match p.radius {
            Some(r) => seasonal_filter(
                &self.trajectories(ctx),
                &reference,
                ctx.series.slot_of_day(target - 1),
                r,
            ),
            None => Ok(reference),
        }
    }

    /// The `k` nearest candidates before any outlier handling.
    pub fn raw_candidates(&self, ctx: &EvalContext<'_>, target: usize, k: usize) -> Result<CandidateSet> {
        let reference = self.reference(ctx, target)?;
        k_nearest(
            &self.trajectories(ctx),
            reference.query,
            &reference,
            self.distance.as_ref(),
            k,
        )
    }

    /// Cuts a larger candidate list down to this model's K and applies the
    /// outlier policy.
    pub fn refine(&self, raw: &CandidateSet) -> Result<CandidateSet> {
        self.outlier.apply(&raw.truncated(self.params.k))
    }

    pub fn aggregate(
        &self,
        ctx: &EvalContext<'_>,
        target: usize,
        candidates: &CandidateSet,
    ) -> Result<PointForecast> {
        let traj = self.trajectories(ctx);
        let query = target - (self.params.window + self.params.step - 1);
        self.aggregator.aggregate(&AggregationInput {
            trajectories: &traj,
            query,
            candidates,
        })
    }

    pub fn candidates_for(&self, ctx: &EvalContext<'_>, target: usize) -> Result<CandidateSet> {
        self.refine(&self.raw_candidates(ctx, target, self.params.k)?)
    }

    pub fn train_on(&mut self, examples: &[(CandidateSet, f64)]) -> Result<()> {
        self.aggregator.train(examples)
    }

    /// Trains on the given targets when the aggregator needs it.
    pub fn fit_on(&mut self, ctx: &EvalContext<'_>, targets: &[usize]) -> Result<()> {
        if !self.aggregator.needs_training() {
            return Ok(());
        }
        let examples = targets
            .par_iter()
            .map(|&t| Ok((self.candidates_for(ctx, t)?, ctx.actual(t))))
            .collect::<Result<Vec<_>>>()?;
        self.train_on(&examples)
    }
}

impl Forecaster for SimilarityForecaster {
    fn label(&self) -> String {
        self.params.to_string()
    }

    fn step(&self) -> usize {
        self.params.step
    }

    fn fit(&mut self, ctx: &EvalContext<'_>) -> Result<()> {
        let targets: Vec<usize> = ctx.tune_targets().collect();
        self.fit_on(ctx, &targets)
    }

    fn forecast(&self, ctx: &EvalContext<'_>, target: usize) -> Result<PointForecast> {
        let candidates = self.candidates_for(ctx, target)?;
        self.aggregate(ctx, target, &candidates)
    }

    fn candidates(&self, ctx: &EvalContext<'_>, target: usize) -> Option<Result<CandidateSet>> {
        Some(self.candidates_for(ctx, target))
    }
}

/// Hyperparameters per hour of day (0–23) of the forecast target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HourlyModelBank {
    entries: Vec<HyperParams>,
}

impl HourlyModelBank {
    pub const HOURS: usize = 24;

    pub fn new(entries: Vec<HyperParams>) -> Result<Self> {
        if entries.len() != Self::HOURS {
            return Err(Error::LengthMismatch {
                expected: Self::HOURS,
                found: entries.len(),
            });
        }
        for (hour, p) in entries.iter().enumerate() {
            p.validate()
                .map_err(|e| Error::invalid(format!("hour {hour}: {e}")))?;
        }
        let step = entries[0].step;
        if entries.iter().any(|p| p.step != step) {
            return Err(Error::invalid("all hours of a bank must share the step h"));
        }
        Ok(Self { entries })
    }

    pub fn uniform(params: HyperParams) -> Result<Self> {
        Self::new(vec![params; Self::HOURS])
    }

    pub fn entries(&self) -> &[HyperParams] {
        &self.entries
    }

    pub fn get(&self, hour: usize) -> &HyperParams {
        &self.entries[hour]
    }

    pub fn step(&self) -> usize {
        self.entries[0].step
    }
}

/// Dispatches each target to the model of its hour of day.
#[derive(Debug)]
pub struct HourlyForecaster {
    models: Vec<SimilarityForecaster>,
}

impl HourlyForecaster {
    pub fn new(bank: &HourlyModelBank) -> Result<Self> {
        let models = bank
            .entries()
            .iter()
            .cloned()
            .map(SimilarityForecaster::new)
            .collect::<Result<_>>()?;
        Ok(Self { models })
    }

    pub fn model_for(&self, ctx: &EvalContext<'_>, target: usize) -> &SimilarityForecaster {
        &self.models[ctx.series.hour_of_day(target - 1)]
    }
}

impl Forecaster for HourlyForecaster {
    fn label(&self) -> String {
        let first = self.models[0].params();
        if self.models.iter().all(|m| m.params() == first) {
            format!("hourly[{first}]")
        } else {
            "hourly".into()
        }
    }

    fn step(&self) -> usize {
        self.models[0].params().step
    }

    /// Each hour's model trains on the tune targets of that hour only.
    fn fit(&mut self, ctx: &EvalContext<'_>) -> Result<()> {
        let mut by_hour = vec![Vec::new(); HourlyModelBank::HOURS];
        for t in ctx.tune_targets() {
            by_hour[ctx.series.hour_of_day(t - 1)].push(t);
        }
        for (hour, model) in self.models.iter_mut().enumerate() {
            model
                .fit_on(ctx, &by_hour[hour])
                .map_err(|e| Error::invalid(format!("hour {hour}: {e}")))?;
        }
        Ok(())
    }

    fn forecast(&self, ctx: &EvalContext<'_>, target: usize) -> Result<PointForecast> {
        self.model_for(ctx, target).forecast(ctx, target)
    }

    fn candidates(&self, ctx: &EvalContext<'_>, target: usize) -> Option<Result<CandidateSet>> {
        self.model_for(ctx, target).candidates(ctx, target)
    }
}

/// One-off forecast of `target` with an hourly bank. Aggregators that need
/// training are fitted on the tune targets of the target's hour.
pub fn forecast_hourly(ctx: &EvalContext<'_>, bank: &HourlyModelBank, target: usize) -> Result<f64> {
    let params = bank.get(ctx.series.hour_of_day(target - 1)).clone();
    let mut model = SimilarityForecaster::new(params)?;
    if model.aggregator().needs_training() {
        let hour = ctx.series.hour_of_day(target - 1);
        let targets: Vec<usize> = ctx
            .tune_targets()
            .filter(|&t| ctx.series.hour_of_day(t - 1) == hour)
            .collect();
        model.fit_on(ctx, &targets)?;
    }
    Ok(model.forecast(ctx, target)?.value)
}

const BANK_HEADER: [&str; 8] = ["hour", "distance", "L", "K", "R", "outlier", "aggregator", "h"];

impl HourlyModelBank {
    /// CSV with one row per hour: `hour,distance,L,K,R,outlier,aggregator,h`
    /// (`R` empty when the seasonal filter is off).
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(BANK_HEADER)?;
        for (hour, p) in self.entries.iter().enumerate() {
            w.write_record([
                hour.to_string(),
                p.distance.clone(),
                p.window.to_string(),
                p.k.to_string(),
                p.radius.map(|r| r.to_string()).unwrap_or_default(),
                p.outlier.clone(),
                p.aggregator.clone(),
                p.step.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Io { path: "<bank>".into(), source: e })
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut entries: Vec<Option<HyperParams>> = vec![None; Self::HOURS];
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i as u64 + 2;
            let field = |j: usize| rec.get(j).unwrap_or_default().trim();
            let num = |j: usize| -> Result<usize> {
                field(j).parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("column {} is not an integer: `{}`", BANK_HEADER[j], field(j)),
                })
            };
            let hour = num(0)?;
            if hour >= Self::HOURS {
                return Err(Error::Parse { line, message: format!("hour {hour} out of range") });
            }
            let radius = if field(4).is_empty() { None } else { Some(num(4)?) };
            entries[hour] = Some(HyperParams {
                distance: field(1).to_string(),
                window: num(2)?,
                k: num(3)?,
                radius,
                outlier: field(5).to_string(),
                aggregator: field(6).to_string(),
                step: num(7)?,
            });
        }
        let missing: Vec<String> = entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_none())
            .map(|(h, _)| h.to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::invalid(format!("hourly bank lacks hour(s) {}", missing.join(", "))));
        }
        Self::new(entries.into_iter().flatten().collect())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
        Self::read_csv(f)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
        self.write_csv(f)
    }
}
