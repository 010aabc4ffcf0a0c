//! Runs a forecaster (and optionally an interval method) over the tune and
//! test queries and condenses the results into report rows.

use rayon::prelude::*;

use crate::dataset::Side;
use crate::error::Result;
use crate::forecaster::{EvalContext, Forecaster};
use crate::intervals::{ErrorSeries, IntervalContext, IntervalMethod, PredictionInterval};
use crate::metrics::{
    dm_test_losses, interval_metrics, point_metrics, winkler_score, DmResult, IntervalEvaluation,
    Loss, PointEvaluation,
};

/// Outcome for one query observation.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub target: usize,
    pub side: Side,
    pub hour: usize,
    pub actual: f64,
    pub forecast: Option<f64>,
    pub interval: Option<(f64, f64)>,
    pub regularized: bool,
    pub error: Option<String>,
}

impl QueryRecord {
    pub fn ok(&self, with_interval: bool) -> bool {
        self.forecast.is_some() && (!with_interval || self.interval.is_some())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelReport {
    pub label: String,
    pub interval: Option<String>,
    pub alpha: f64,
    pub step: usize,
    pub records: Vec<QueryRecord>,
    /// Set when fitting failed; no forecasts were attempted.
    pub fit_error: Option<String>,
}

/// Fits `model` and evaluates it on every tune and test query.
pub fn evaluate(
    ctx: &EvalContext<'_>,
    model: &mut dyn Forecaster,
    interval: Option<&dyn IntervalMethod>,
    alpha: f64,
) -> ModelReport {
    let mut report = ModelReport {
        label: model.label(),
        interval: interval.map(|m| m.spec()),
        alpha,
        step: model.step(),
        records: Vec::new(),
        fit_error: None,
    };
    if let Err(e) = crate::intervals::check_alpha(alpha).and_then(|_| model.fit(ctx)) {
        report.fit_error = Some(e.to_string());
        return report;
    }
    let model: &dyn Forecaster = model;
    let plan = ctx.plan;
    let warm = interval.map_or(0, |m| m.error_history(model.step()));
    let first = plan.tune_first.saturating_sub(warm).max(1);
    let forecasts: Vec<Result<crate::pointcast::PointForecast>> = (first..=plan.total)
        .into_par_iter()
        .map(|t| model.forecast(ctx, t))
        .collect();
    let values = ctx.series.values();
    let errors = ErrorSeries::from_forecasts(
        first,
        ctx.series.slot_of_day(first - 1),
        &forecasts.iter().map(|f| f.as_ref().ok().map(|p| p.value)).collect::<Vec<_>>(),
        &values[first - 1..],
    );
    let ictx = interval.map(|_| IntervalContext {
        eval: *ctx,
        errors: &errors,
        model,
        alpha,
    });
    report.records = (plan.tune_first..=plan.total)
        .into_par_iter()
        .map(|t| {
            let mut rec = QueryRecord {
                target: t,
                side: plan.side_of(t),
                hour: ctx.series.hour_of_day(t - 1),
                actual: ctx.actual(t),
                forecast: None,
                interval: None,
                regularized: false,
                error: None,
            };
            match &forecasts[t - first] {
                Ok(p) => {
                    rec.forecast = Some(p.value);
                    rec.regularized = p.regularized;
                    if let (Some(method), Some(ictx)) = (interval, &ictx) {
                        match method.interval(ictx, t, p.value) {
                            Ok(pi) => rec.interval = Some((pi.lower, pi.upper)),
                            Err(e) => rec.error = Some(format!("interval: {e}")),
                        }
                    }
                }
                Err(e) => rec.error = Some(e.to_string()),
            }
            rec
        })
        .collect();
    report
}

/// Metrics of one model on one split (or one hour of it).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub model: String,
    pub split: Side,
    pub point: Option<PointEvaluation>,
    pub interval: Option<IntervalEvaluation>,
    pub n: usize,
    pub failed: usize,
    pub status: String,
}

impl ModelReport {
    pub fn display_name(&self) -> String {
        match &self.interval {
            Some(i) => format!("{} | {i}", self.label),
            None => self.label.clone(),
        }
    }

    pub fn side(&self, side: Side) -> impl Iterator<Item = &QueryRecord> + '_ {
        self.records.iter().filter(move |r| r.side == side)
    }

    pub fn summarize(&self, side: Side) -> SummaryRow {
        self.summarize_where(side, |_| true)
    }

    /// Summary of the records of `side` accepted by `keep`. Metrics cover
    /// the successful records; any failure is reported in `status`.
    pub fn summarize_where(&self, side: Side, keep: impl Fn(&QueryRecord) -> bool) -> SummaryRow {
        let mut row = SummaryRow {
            model: self.display_name(),
            split: side,
            point: None,
            interval: None,
            n: 0,
            failed: 0,
            status: "ok".into(),
        };
        if let Some(e) = &self.fit_error {
            row.status = format!("error: fit failed: {e}");
            return row;
        }
        let with_interval = self.interval.is_some();
        let recs: Vec<&QueryRecord> = self.side(side).filter(|r| keep(r)).collect();
        let good: Vec<&&QueryRecord> = recs.iter().filter(|r| r.ok(with_interval)).collect();
        row.n = good.len();
        row.failed = recs.len() - good.len();
        if let Some(bad) = recs.iter().find(|r| !r.ok(with_interval)) {
            row.status = format!(
                "error: {} of {} queries failed, first at t={}: {}",
                row.failed,
                recs.len(),
                bad.target,
                bad.error.as_deref().unwrap_or("unknown")
            );
        } else if recs.is_empty() {
            row.status = "error: no queries".into();
        }
        if good.is_empty() {
            return row;
        }
        let actuals: Vec<f64> = good.iter().map(|r| r.actual).collect();
        let forecasts: Vec<f64> = good.iter().filter_map(|r| r.forecast).collect();
        row.point = point_metrics(&forecasts, &actuals).ok();
        if with_interval {
            let pis: Vec<PredictionInterval> = good
                .iter()
                .filter_map(|r| r.interval)
                .map(|(lower, upper)| PredictionInterval { lower, upper, alpha: self.alpha })
                .collect();
            row.interval = interval_metrics(&pis, &actuals, self.alpha).ok();
        }
        row
    }

    /// Per-hour summaries of `side` (24 rows).
    pub fn hourly(&self, side: Side) -> Vec<SummaryRow> {
        (0..24).map(|h| self.summarize_where(side, |r| r.hour == h)).collect()
    }

    pub fn is_ok(&self) -> bool {
        self.fit_error.is_none() && self.records.iter().all(|r| r.ok(self.interval.is_some()))
    }

    /// Per-target loss on `side`: absolute error, or the Winkler score when
    /// `winkler` is set. `None` where the record failed.
    pub fn losses(&self, side: Side, winkler: bool) -> Vec<(usize, usize, Option<f64>)> {
        self.side(side)
            .map(|r| {
                let loss = if winkler {
                    r.interval.map(|(lower, upper)| {
                        winkler_score(&PredictionInterval { lower, upper, alpha: self.alpha }, r.actual)
                    })
                } else {
                    r.forecast.map(|f| Loss::Absolute.apply(f - r.actual))
                };
                (r.target, r.hour, loss)
            })
            .collect()
    }
}

/// DM comparison of two reports on the targets both handled, optionally
/// restricted to one hour of day.
pub fn dm_compare(
    a: &ModelReport,
    b: &ModelReport,
    side: Side,
    winkler: bool,
    hour: Option<usize>,
) -> Result<DmResult> {
    let la = a.losses(side, winkler);
    let lb = b.losses(side, winkler);
    let (mut xa, mut xb) = (Vec::new(), Vec::new());
    for ((ta, ha, va), (tb, _, vb)) in la.iter().zip(&lb) {
        debug_assert_eq!(ta, tb);
        if hour.is_some_and(|h| h != *ha) {
            continue;
        }
        if let (Some(va), Some(vb)) = (va, vb) {
            xa.push(*va);
            xb.push(*vb);
        }
    }
    dm_test_losses(&xa, &xb, a.step.max(b.step))
}
