//! The common forecaster interface and the model-spec parser.
//!
//! A model spec reads `<base>[+seasonal:<R>][/key=value]*`, for example
//! `m1:f2+seasonal:3/L=10/K=25` or `ar:9/h=4`. Similarity bases are the
//! aggregator names (`mean`, `m1:<f>`, `m2:<g>`, `m3`, `localreg`) and accept
//! the keys `distance`, `L`, `K`, `R`, `outlier` and `h`. `hourly` uses a
//! supplied bank of per-hour hyperparameters; `hourly:<aggregator>` builds a
//! bank with the same settings for every hour. Benchmarks are `naive`,
//! `snaive:<period>:<depth>` and `ar:<p>` (key `intercept=true|false`).

use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::sync::OnceLock;

use crate::benchmarks::{ArForecaster, NaiveForecaster, SeasonalNaiveForecaster};
use crate::dataset::{Side, SplitPlan};
use crate::error::{Error, Result};
use crate::ingestion::TimeSeries;
use crate::neighbors::CandidateSet;
use crate::pointcast::{
    HourlyForecaster, HourlyModelBank, HyperParams, PointForecast, SimilarityForecaster,
};
use crate::registry::{expect_args, parse_arg, Registry};

/// Series plus split: everything a forecaster may look at.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub series: &'a TimeSeries,
    pub plan: &'a SplitPlan,
}

impl<'a> EvalContext<'a> {
    pub fn new(series: &'a TimeSeries, plan: &'a SplitPlan) -> Result<Self> {
        if plan.total != series.len() {
            return Err(Error::LengthMismatch {
                expected: series.len(),
                found: plan.total,
            });
        }
        Ok(Self { series, plan })
    }

    /// Observed value at 1-based index `target`.
    pub fn actual(&self, target: usize) -> f64 {
        self.series.values()[target - 1]
    }

    pub fn targets(&self, side: Side) -> RangeInclusive<usize> {
        self.plan.targets(side)
    }

    pub fn tune_targets(&self) -> RangeInclusive<usize> {
        self.plan.targets(Side::Tune)
    }
}

pub trait Forecaster: Send + Sync + fmt::Debug {
    fn label(&self) -> String;

    /// Forecast horizon h in slots.
    fn step(&self) -> usize;

    /// Uses tune-split information only.
    fn fit(&mut self, _ctx: &EvalContext<'_>) -> Result<()> {
        Ok(())
    }

    /// Forecast of observation `target` (1-based) from data up to `target − h`.
    fn forecast(&self, ctx: &EvalContext<'_>, target: usize) -> Result<PointForecast>;

    /// Candidate set behind the forecast, for similarity models.
    fn candidates(&self, _ctx: &EvalContext<'_>, _target: usize) -> Option<Result<CandidateSet>> {
        None
    }
}

/// Parsed suffixes of a model spec plus run-wide settings.
#[derive(Debug, Clone, Default)]
pub struct ModelOptions {
    pub seasonal: Option<usize>,
    pub overrides: BTreeMap<String, String>,
    pub bank: Option<HourlyModelBank>,
    /// Run-wide default for AR intercepts; `/intercept=` overrides it.
    pub ar_intercept: Option<bool>,
}

impl ModelOptions {
    fn check_keys(&self, model: &str, allowed: &[&str]) -> Result<()> {
        let bad: Vec<&str> = self
            .overrides
            .keys()
            .map(String::as_str)
            .filter(|k| !allowed.contains(k))
            .collect();
        if !bad.is_empty() {
            return Err(Error::invalid(format!(
                "{model}: unknown option(s) {} (allowed: {})",
                bad.join(", "),
                allowed.join(", ")
            )));
        }
        if self.seasonal.is_some() && !allowed.contains(&"R") {
            return Err(Error::invalid(format!("{model} has no seasonal variant")));
        }
        Ok(())
    }

    fn get<V: std::str::FromStr>(&self, key: &str) -> Result<Option<V>> {
        self.overrides
            .get(key)
            .map(|raw| parse_arg("model option", key, raw))
            .transpose()
    }

    fn step(&self) -> Result<usize> {
        let h = self.get("h")?.unwrap_or(1);
        if h == 0 {
            return Err(Error::invalid("step h must be at least 1"));
        }
        Ok(h)
    }

    /// Similarity hyperparameters for aggregator `aggregator`.
    pub fn hyper_params(&self, aggregator: &str) -> Result<HyperParams> {
        let radius = match (self.seasonal, self.get::<usize>("R")?) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::invalid(format!("conflicting radii {a} and {b}")))
            }
            (a, b) => a.or(b),
        };
        let base = if radius.is_some() {
            HyperParams::seasonal()
        } else {
            HyperParams::default()
        };
        let params = HyperParams {
            distance: self.get("distance")?.unwrap_or(base.distance),
            window: self.get("L")?.unwrap_or(base.window),
            k: self.get("K")?.unwrap_or(base.k),
            radius,
            outlier: self.get("outlier")?.unwrap_or(base.outlier),
            aggregator: aggregator.to_string(),
            step: self.step()?,
        };
        params.validate()?;
        Ok(params)
    }
}

const SIMILARITY_KEYS: &[&str] = &["distance", "L", "K", "R", "outlier", "h"];

fn similarity(aggregator: &str, opts: &ModelOptions) -> Result<Box<dyn Forecaster>> {
    opts.check_keys(aggregator, SIMILARITY_KEYS)?;
    Ok(Box::new(SimilarityForecaster::new(opts.hyper_params(aggregator)?)?))
}

pub fn registry() -> Registry<dyn Forecaster, ModelOptions> {
    let mut reg: Registry<dyn Forecaster, ModelOptions> = Registry::new("model");
    reg.register("mean", |a, o| {
        expect_args("mean", a, 0)?;
        similarity("mean", o)
    })
    .register("m1", |a, o| {
        expect_args("m1", a, 1)?;
        similarity(&format!("m1:{}", a[0]), o)
    })
    .register("m2", |a, o| {
        expect_args("m2", a, 1)?;
        similarity(&format!("m2:{}", a[0]), o)
    })
    .register("m3", |a, o| {
        expect_args("m3", a, 0)?;
        similarity("m3", o)
    })
    .register("localreg", |a, o| {
        expect_args("localreg", a, 0)?;
        similarity("localreg", o)
    })
    .register("hourly", |a, o| {
        let bank = if a.is_empty() {
            o.check_keys("hourly", &[])?;
            o.bank
                .clone()
                .ok_or_else(|| Error::invalid("hourly model needs an hourly bank"))?
        } else {
            o.check_keys("hourly", SIMILARITY_KEYS)?;
            HourlyModelBank::uniform(o.hyper_params(&a.join(":"))?)?
        };
        Ok(Box::new(HourlyForecaster::new(&bank)?))
    })
    .register("naive", |a, o| {
        expect_args("naive", a, 0)?;
        o.check_keys("naive", &["h"])?;
        Ok(Box::new(NaiveForecaster::new(o.step()?)))
    })
    .register("snaive", |a, o| {
        expect_args("snaive", a, 2)?;
        o.check_keys("snaive", &["h"])?;
        Ok(Box::new(SeasonalNaiveForecaster::new(
            parse_arg("snaive", "period", a[0])?,
            parse_arg("snaive", "depth", a[1])?,
            o.step()?,
        )?))
    })
    .register("ar", |a, o| {
        expect_args("ar", a, 1)?;
        o.check_keys("ar", &["h", "intercept"])?;
        let intercept = o.get("intercept")?.or(o.ar_intercept).unwrap_or(true);
        Ok(Box::new(ArForecaster::new(
            parse_arg("ar", "p", a[0])?,
            intercept,
            o.step()?,
        )?))
    });
    reg
}

/// Splits a model spec into base, seasonal radius and `key=value` overrides.
pub fn split_spec(spec: &str) -> Result<(String, ModelOptions)> {
    let mut parts = spec.trim().split('/');
    let head = parts.next().unwrap_or_default();
    let mut opts = ModelOptions::default();
    for kv in parts {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("model option `{kv}` is not key=value")))?;
        if opts.overrides.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(Error::invalid(format!("model option `{k}` given twice")));
        }
    }
    let base = match head.split_once('+') {
        Some((base, suffix)) => {
            let radius = suffix
                .strip_prefix("seasonal:")
                .ok_or_else(|| Error::invalid(format!("unknown model suffix `+{suffix}`")))?;
            opts.seasonal = Some(parse_arg("seasonal", "R", radius)?);
            base
        }
        None => head,
    };
    Ok((base.to_string(), opts))
}

/// Builds a forecaster from a model spec. `bank` feeds `hourly`;
/// `ar_intercept` sets the AR default.
pub fn parse_model(
    spec: &str,
    bank: Option<&HourlyModelBank>,
    ar_intercept: Option<bool>,
) -> Result<Box<dyn Forecaster>> {
    static BUILTIN: OnceLock<Registry<dyn Forecaster, ModelOptions>> = OnceLock::new();
    let (base, mut opts) = split_spec(spec)?;
    opts.bank = bank.cloned();
    opts.ar_intercept = ar_intercept;
    BUILTIN.get_or_init(registry).create_with(&base, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_overrides_and_seasonal_suffix() {
        let (base, o) = split_spec("m1:f2+seasonal:3/L=10/K=30").unwrap();
        assert_eq!(base, "m1:f2");
        assert_eq!(o.seasonal, Some(3));
        let p = o.hyper_params("m1:f2").unwrap();
        assert_eq!((p.window, p.k, p.radius), (10, 30, Some(3)));
    }

    #[test]
    fn defaults_follow_headline_models() {
        let plain = split_spec("mean").unwrap().1.hyper_params("mean").unwrap();
        assert_eq!((plain.distance.as_str(), plain.window, plain.k, plain.radius), ("weuclidean", 14, 25, None));
        let seasonal = split_spec("mean+seasonal:3").unwrap().1.hyper_params("mean").unwrap();
        assert_eq!((seasonal.window, seasonal.k, seasonal.radius), (10, 25, Some(3)));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(parse_model("mean/Q=3", None, None).is_err());
        assert!(parse_model("naive+seasonal:2", None, None).is_err());
        assert!(parse_model("hourly", None, None).is_err());
        assert!(parse_model("mean/L=1", None, None).is_err());
        assert!(parse_model("mean+seasonal:60", None, None).is_err());
        assert!(parse_model("bogus", None, None).is_err());
        assert!(parse_model("ar:3/intercept=false", None, None).is_ok());
        assert!(parse_model("hourly:m2:g1/L=6", None, None).is_ok());
    }
}
