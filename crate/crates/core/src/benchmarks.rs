//! Baseline forecasters: naive, seasonal naive and AR(p) by least squares.

use crate::error::{Error, Result};
use crate::forecaster::{EvalContext, Forecaster};
use crate::ingestion::TimeSeries;
use crate::linalg::least_squares;
use crate::pointcast::PointForecast;

/// One-step naive forecast of observation `t` (1-based).
///
/// Plain: the value at `t − 1`. Seasonal `(period, depth)`: the mean of the
/// values at `t − period·j` for `j = 1..=depth` that exist.
pub fn naive_forecast(ts: &TimeSeries, t: usize, seasonal: Option<(usize, usize)>) -> Result<f64> {
    match seasonal {
        None => lagged(ts.values(), t, 1),
        Some((period, depth)) => seasonal_mean(ts.values(), t, period, depth),
    }
}

fn lagged(values: &[f64], t: usize, lag: usize) -> Result<f64> {
    if t <= lag || t > values.len() + lag {
        return Err(Error::insufficient(format!(
            "observation {t} has no value {lag} slot(s) earlier"
        )));
    }
    Ok(values[t - lag - 1])
}

fn seasonal_mean(values: &[f64], t: usize, period: usize, depth: usize) -> Result<f64> {
    if period == 0 || depth == 0 {
        return Err(Error::invalid("seasonal naive needs period ≥ 1 and depth ≥ 1"));
    }
    if t <= period {
        return Err(Error::insufficient(format!(
            "observation {t} has no value one period ({period}) earlier"
        )));
    }
    let picks: Vec<f64> = (1..=depth)
        .take_while(|j| period * j < t)
        .map(|j| values[t - period * j - 1])
        .collect();
    Ok(picks.iter().sum::<f64>() / picks.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArModel {
    /// `coefficients[i]` multiplies `x_{t−1−i}`.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub regularized: bool,
}

impl ArModel {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }
}

/// Least-squares AR(p) fit on `window`, optionally with an intercept.
pub fn fit_ar(window: &[f64], p: usize, intercept: bool) -> Result<ArModel> {
    if p == 0 {
        return Err(Error::invalid("AR order must be at least 1"));
    }
    if window.len() < p + 2 {
        return Err(Error::insufficient(format!(
            "AR({p}) needs at least {} observations, got {}",
            p + 2,
            window.len()
        )));
    }
    let cols = p + usize::from(intercept);
    let rows: Vec<Vec<f64>> = (p..window.len())
        .map(|t| {
            let mut row: Vec<f64> = (1..=p).map(|i| window[t - i]).collect();
            if intercept {
                row.push(1.0);
            }
            row
        })
        .collect();
    let fit = least_squares(rows.iter().map(Vec::as_slice), &window[p..], cols)?;
    let mut coefficients = fit.coefficients;
    let c = if intercept { coefficients.pop().unwrap_or_default() } else { 0.0 };
    Ok(ArModel {
        coefficients,
        intercept: c,
        regularized: fit.regularized,
    })
}

/// One-step AR forecast from the last `p` values, oldest first.
pub fn ar_forecast(model: &ArModel, recent: &[f64]) -> Result<f64> {
    let p = model.order();
    if recent.len() != p {
        return Err(Error::LengthMismatch {
            expected: p,
            found: recent.len(),
        });
    }
    Ok(model.intercept
        + model
            .coefficients
            .iter()
            .zip(recent.iter().rev())
            .map(|(a, x)| a * x)
            .sum::<f64>())
}

/// `steps`-ahead forecast from `history` (oldest first), feeding each
/// forecast back as the newest value.
pub fn ar_forecast_ahead(model: &ArModel, history: &[f64], steps: usize) -> Result<f64> {
    let p = model.order();
    if history.len() < p {
        return Err(Error::insufficient(format!(
            "AR({p}) needs {p} past values, got {}",
            history.len()
        )));
    }
    let mut buf = history[history.len() - p..].to_vec();
    let mut next = f64::NAN;
    for _ in 0..steps.max(1) {
        next = ar_forecast(model, &buf)?;
        buf.remove(0);
        buf.push(next);
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NaiveForecaster {
    step: usize,
}

impl NaiveForecaster {
    pub fn new(step: usize) -> Self {
        Self { step: step.max(1) }
    }
}

impl Forecaster for NaiveForecaster {
    fn label(&self) -> String {
        suffix_step("naive".into(), self.step)
    }

    fn step(&self) -> usize {
        self.step
    }

    /// Last value known at the forecast origin `target − h`.
    fn forecast(&self, ctx: &EvalContext<'_>, target: usize) -> Result<PointForecast> {
        lagged(ctx.series.values(), target, self.step).map(PointForecast::plain)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeasonalNaiveForecaster {
    period: usize,
    depth: usize,
    step: usize,
}

impl SeasonalNaiveForecaster {
    pub fn new(period: usize, depth: usize, step: usize) -> Result<Self> {
        if period == 0 || depth == 0 {
            return Err(Error::invalid("seasonal naive needs period ≥ 1 and depth ≥ 1"));
        }
        if period < step {
            return Err(Error::invalid(format!(
                "seasonal period {period} is shorter than the step {step}"
            )));
        }
        Ok(Self { period, depth, step: step.max(1) })
    }
}

impl Forecaster for SeasonalNaiveForecaster {
    fn label(&self) -> String {
        suffix_step(format!("snaive:{}:{}", self.period, self.depth), self.step)
    }

    fn step(&self) -> usize {
        self.step
    }

    fn forecast(&self, ctx: &EvalContext<'_>, target: usize) -> Result<PointForecast> {
        seasonal_mean(ctx.series.values(), target, self.period, self.depth).map(PointForecast::plain)
    }
}

/// AR(p) fitted once on the observations before the tune queries.
#[derive(Debug, Clone)]
pub struct ArForecaster {
    order: usize,
    intercept: bool,
    step: usize,
    model: Option<ArModel>,
}

impl ArForecaster {
    pub fn new(order: usize, intercept: bool, step: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("AR order must be at least 1"));
        }
        Ok(Self {
            order,
            intercept,
            step: step.max(1),
            model: None,
        })
    }

    pub fn model(&self) -> Option<&ArModel> {
        self.model.as_ref()
    }
}

impl Forecaster for ArForecaster {
    fn label(&self) -> String {
        let base = if self.intercept {
            format!("ar:{}", self.order)
        } else {
            format!("ar:{}/intercept=false", self.order)
        };
        suffix_step(base, self.step)
    }

    fn step(&self) -> usize {
        self.step
    }

    fn fit(&mut self, ctx: &EvalContext<'_>) -> Result<()> {
        let training = &ctx.series.values()[..ctx.plan.tune_first - 1];
        self.model = Some(fit_ar(training, self.order, self.intercept)?);
        Ok(())
    }

    fn forecast(&self, ctx: &EvalContext<'_>, target: usize) -> Result<PointForecast> {
        let model = self
            .model
            .as_ref()
            .ok_or_else(|| Error::invalid("AR model used before fitting"))?;
        if target <= self.step {
            return Err(Error::insufficient(format!("observation {target} has no forecast origin")));
        }
        let history = &ctx.series.values()[..target - self.step];
        Ok(PointForecast {
            value: ar_forecast_ahead(model, history, self.step)?,
            regularized: model.regularized,
        })
    }
}

fn suffix_step(label: String, step: usize) -> String {
    if step == 1 {
        label
    } else {
        format!("{label}/h={step}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn series(values: Vec<f64>) -> TimeSeries {
        let start = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        TimeSeries::new(start, values).unwrap()
    }

    #[test]
    fn naive_examples() {
        let ts = series(vec![100.0, 110.0, 120.0, 130.0]);
        assert_eq!(naive_forecast(&ts, 4, None).unwrap(), 120.0);
        assert!(naive_forecast(&ts, 1, None).is_err());
        let day: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let ts = series(day);
        assert_eq!(naive_forecast(&ts, 150, Some((96, 1))).unwrap(), 53.0);
        // depth 3 but only one earlier day exists
        assert_eq!(naive_forecast(&ts, 150, Some((96, 3))).unwrap(), 53.0);
        assert!(naive_forecast(&ts, 96, Some((96, 1))).is_err());
    }

    #[test]
    fn ar_recovers_exact_recursion() {
        let mut x = vec![20.0];
        for _ in 0..40 {
            let prev = *x.last().unwrap();
            x.push(0.5 * prev + 3.0);
        }
        // the tail converges to 6; keep the informative head
        let m = fit_ar(&x[..20], 1, true).unwrap();
        assert_abs_diff_eq!(m.coefficients[0], 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(m.intercept, 3.0, epsilon = 1e-8);
    }

    #[test]
    fn ar_constant_series_forecasts_constant() {
        let m = fit_ar(&[7.0; 30], 2, true).unwrap();
        assert!(m.regularized);
        assert_abs_diff_eq!(ar_forecast(&m, &[7.0, 7.0]).unwrap(), 7.0, epsilon = 1e-6);
        assert!(fit_ar(&[1.0, 2.0, 3.0], 2, true).is_err());
    }

    #[test]
    fn ar_forecast_examples() {
        let m = ArModel { coefficients: vec![0.5], intercept: 0.0, regularized: false };
        assert_eq!(ar_forecast(&m, &[10.0]).unwrap(), 5.0);
        let c = ArModel { coefficients: vec![0.0, 0.0], intercept: 7.0, regularized: false };
        assert_eq!(ar_forecast(&c, &[1.0, 2.0]).unwrap(), 7.0);
        assert!(ar_forecast(&c, &[1.0]).is_err());
        // 10 → 5 → 2.5
        assert_eq!(ar_forecast_ahead(&m, &[3.0, 10.0], 2).unwrap(), 2.5);
    }

    #[test]
    fn ar_coefficient_order_is_lag_order() {
        // x_t = 0.6 x_{t-1} − 0.2 x_{t-2} + 5
        let mut x = vec![10.0, 30.0];
        for t in 2..60 {
            let v = 0.6 * x[t - 1] - 0.2 * x[t - 2] + 5.0 + if t % 7 == 0 { 1.0 } else { 0.0 };
            x.push(v);
        }
        let m = fit_ar(&x, 2, true).unwrap();
        assert!((m.coefficients[0] - 0.6).abs() < 0.05);
        assert!((m.coefficients[1] + 0.2).abs() < 0.05);
    }

    proptest! {
        #[test]
        fn naive_mae_is_mean_first_difference(values in prop::collection::vec(0.0f64..1e3, 3..200)) {
            let ts = series(values.clone());
            let n = values.len();
            let mae: f64 = (2..=n)
                .map(|t| (naive_forecast(&ts, t, None).unwrap() - values[t - 1]).abs())
                .sum::<f64>() / (n - 1) as f64;
            let diff: f64 = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / (n - 1) as f64;
            prop_assert!((mae - diff).abs() <= 1e-12 * diff.max(1.0));
        }

        #[test]
        fn ar_recovers_stable_process(r1 in 0.5f64..0.9, r2 in -0.7f64..-0.3, c in 1.0f64..20.0) {
            // AR(2) with characteristic roots r1, r2, started far from its
            // mean so both modes show up in the fitting window
            let (a1, a2) = (r1 + r2, -r1 * r2);
            let mut x = vec![100.0, 0.0];
            for t in 2..30 {
                x.push(a1 * x[t - 1] + a2 * x[t - 2] + c);
            }
            let m = fit_ar(&x, 2, true).unwrap();
            prop_assert!(!m.regularized);
            prop_assert!((m.coefficients[0] - a1).abs() < 1e-6);
            prop_assert!((m.coefficients[1] - a2).abs() < 1e-6);
            prop_assert!((m.intercept - c).abs() < 1e-5);
        }
    }
}
