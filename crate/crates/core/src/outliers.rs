//! Candidate outlier policies: winsorization, tail removal, z-score removal.
//!
//! Policies look at candidates in value order but return entries in their
//! original distance order. Config names: `none`, `winsor`,
//! `tailc:<c1>:<c2>`, `tailp:<g1>:<g2>`, `zscore:<tau>`.

use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::neighbors::CandidateSet;
use crate::registry::{expect_args, parse_arg, Registry};

pub trait OutlierPolicy: Send + Sync + fmt::Debug {
    fn spec(&self) -> String;

    fn apply(&self, candidates: &CandidateSet) -> Result<CandidateSet>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoOutlierPolicy;

impl OutlierPolicy for NoOutlierPolicy {
    fn spec(&self) -> String {
        "none".into()
    }

    fn apply(&self, candidates: &CandidateSet) -> Result<CandidateSet> {
        Ok(candidates.clone())
    }
}

/// Replaces the single smallest value by the second smallest and the single
/// largest by the second largest.
pub fn winsorize(candidates: &CandidateSet) -> Result<CandidateSet> {
    let n = candidates.len();
    if n < 3 {
        return Err(Error::insufficient(format!(
            "winsorization needs at least 3 candidates, got {n}"
        )));
    }
    let order = candidates.value_order();
    let mut out = candidates.clone();
    out.entries[order[0]].value = candidates.entries[order[1]].value;
    out.entries[order[n - 1]].value = candidates.entries[order[n - 2]].value;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Winsorize;

impl OutlierPolicy for Winsorize {
    fn spec(&self) -> String {
        "winsor".into()
    }

    fn apply(&self, candidates: &CandidateSet) -> Result<CandidateSet> {
        winsorize(candidates)
    }
}

/// How many candidates tail removal drops from each end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailRule {
    Constant { low: usize, high: usize },
    Percentile { low: f64, high: f64 },
}

impl TailRule {
    pub fn percentile(low: f64, high: f64) -> Result<Self> {
        if !(low >= 0.0 && high >= 0.0 && low + high < 1.0) {
            return Err(Error::invalid(format!(
                "tail percentiles need γ1, γ2 ≥ 0 and γ1 + γ2 < 1 (got {low}, {high})"
            )));
        }
        Ok(TailRule::Percentile { low, high })
    }

    /// `(r1, r2)` for a candidate set of size `k`.
    pub fn counts(&self, k: usize) -> (usize, usize) {
        match *self {
            TailRule::Constant { low, high } => (low, high),
            TailRule::Percentile { low, high } => {
                ((low * k as f64).floor() as usize, (high * k as f64).floor() as usize)
            }
        }
    }
}

/// Drops the `r1` smallest and `r2` largest candidate values.
pub fn tail_remove(candidates: &CandidateSet, rule: TailRule) -> Result<CandidateSet> {
    let n = candidates.len();
    let (low, high) = rule.counts(n);
    if low + high >= n {
        return Err(Error::insufficient(format!(
            "tail removal of {low} + {high} would empty a set of {n} candidates"
        )));
    }
    let order = candidates.value_order();
    let mut keep = vec![false; n];
    for &i in &order[low..n - high] {
        keep[i] = true;
    }
    Ok(CandidateSet {
        entries: candidates
            .entries
            .iter()
            .zip(keep)
            .filter_map(|(c, k)| k.then_some(*c))
            .collect(),
        k: candidates.k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailRemoval(pub TailRule);

impl OutlierPolicy for TailRemoval {
    fn spec(&self) -> String {
        match self.0 {
            TailRule::Constant { low, high } => format!("tailc:{low}:{high}"),
            TailRule::Percentile { low, high } => format!("tailp:{low}:{high}"),
        }
    }

    fn apply(&self, candidates: &CandidateSet) -> Result<CandidateSet> {
        tail_remove(candidates, self.0)
    }
}

/// Drops candidates whose z-score (sample standard deviation) exceeds
/// `tau`. Single pass; identity for fewer than 3 candidates or zero spread.
pub fn zscore_remove(candidates: &CandidateSet, tau: f64) -> Result<CandidateSet> {
    let n = candidates.len();
    if n < 3 {
        return Ok(candidates.clone());
    }
    let values = candidates.values();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Ok(candidates.clone());
    }
    let entries: Vec<_> = candidates
        .entries
        .iter()
        .filter(|c| (c.value - mean).abs() / sd <= tau)
        .copied()
        .collect();
    if entries.is_empty() {
        return Err(Error::insufficient("z-score removal emptied the candidate set"));
    }
    Ok(CandidateSet {
        entries,
        k: candidates.k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZScore {
    tau: f64,
}

impl ZScore {
    pub const DEFAULT_TAU: f64 = 2.0;

    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::invalid(format!("z-score threshold must be positive, got {tau}")));
        }
        Ok(Self { tau })
    }
}

impl OutlierPolicy for ZScore {
    fn spec(&self) -> String {
        format!("zscore:{}", self.tau)
    }

    fn apply(&self, candidates: &CandidateSet) -> Result<CandidateSet> {
        zscore_remove(candidates, self.tau)
    }
}

pub fn registry() -> Registry<dyn OutlierPolicy> {
    let mut reg: Registry<dyn OutlierPolicy> = Registry::new("outlier policy");
    reg.register("none", |a, _| {
        expect_args("none", a, 0)?;
        Ok(Box::new(NoOutlierPolicy))
    })
    .register("winsor", |a, _| {
        expect_args("winsor", a, 0)?;
        Ok(Box::new(Winsorize))
    })
    .register("tailc", |a, _| {
        expect_args("tailc", a, 2)?;
        Ok(Box::new(TailRemoval(TailRule::Constant {
            low: parse_arg("tailc", "c1", a[0])?,
            high: parse_arg("tailc", "c2", a[1])?,
        })))
    })
    .register("tailp", |a, _| {
        expect_args("tailp", a, 2)?;
        Ok(Box::new(TailRemoval(TailRule::percentile(
            parse_arg("tailp", "g1", a[0])?,
            parse_arg("tailp", "g2", a[1])?,
        )?)))
    })
    .register("zscore", |a, _| {
        let tau = match a {
            [] => ZScore::DEFAULT_TAU,
            [t] => parse_arg("zscore", "tau", t)?,
            _ => return Err(Error::invalid("zscore expects at most one argument")),
        };
        Ok(Box::new(ZScore::new(tau)?))
    });
    reg
}

pub fn parse(spec: &str) -> Result<Box<dyn OutlierPolicy>> {
    static BUILTIN: OnceLock<Registry<dyn OutlierPolicy>> = OnceLock::new();
    BUILTIN.get_or_init(registry).create(spec)
}
