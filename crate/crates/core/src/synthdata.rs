//! Seeded synthetic 15-minute series.
//!
//! Noise comes from ChaCha8 (`rand_chacha`) seeded with `SynthSpec::seed`
//! and Gaussian draws from `rand_distr::Normal`, so a seed reproduces the
//! same series bit for bit on every platform. Values are clamped at zero.

use std::f64::consts::TAU;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::ingestion::{TimeSeries, SLOTS_PER_DAY};

#[derive(Debug, Clone, PartialEq)]
pub enum SynthKind {
    /// `x_t = c + Σ a_i x_{t−i} + ε_t`, started from `init` (oldest first).
    Ar {
        coefficients: Vec<f64>,
        intercept: f64,
        noise_sd: f64,
        init: Vec<f64>,
    },
    /// `level + amplitude · sin(2π t / 96) + ε_t`.
    DailySinusoid {
        level: f64,
        amplitude: f64,
        noise_sd: f64,
    },
    /// Separate daily sinusoid profiles for weekdays and weekends.
    TwoRegime {
        weekday: (f64, f64),
        weekend: (f64, f64),
        noise_sd: f64,
    },
    /// A random integer pattern of length `period` repeated exactly.
    PeriodicExact { period: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub length: usize,
    pub seed: u64,
    pub start: NaiveDateTime,
}

impl SynthSpec {
    /// Monday 2021-01-04 00:00.
    pub fn default_start() -> NaiveDateTime {
        NaiveDate::from_ymd_opt(2021, 1, 4)
            .and_then(|d| d.and_hms_opt(0, 0, 0))
            .expect("valid constant date")
    }

    pub fn new(kind: SynthKind, length: usize, seed: u64) -> Self {
        Self {
            kind,
            length,
            seed,
            start: Self::default_start(),
        }
    }
}

fn noise(sd: f64) -> Result<Normal<f64>> {
    if !(sd >= 0.0 && sd.is_finite()) {
        return Err(Error::invalid(format!("noise sd must be finite and ≥ 0, got {sd}")));
    }
    Normal::new(0.0, sd).map_err(|e| Error::invalid(e.to_string()))
}

fn sinusoid(t: usize, level: f64, amplitude: f64) -> f64 {
    level + amplitude * (TAU * (t % SLOTS_PER_DAY) as f64 / SLOTS_PER_DAY as f64).sin()
}

pub fn generate(spec: &SynthSpec) -> Result<TimeSeries> {
    if spec.length == 0 {
        return Err(Error::invalid("synthetic series length must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.length;
    let values: Vec<f64> = match &spec.kind {
        SynthKind::Ar { coefficients, intercept, noise_sd, init } => {
            let p = coefficients.len();
            if p == 0 || init.len() < p {
                return Err(Error::invalid("AR generator needs p ≥ 1 coefficients and p initial values"));
            }
            let eps = noise(*noise_sd)?;
            let mut x: Vec<f64> = init.iter().take(n).copied().collect();
            while x.len() < n {
                let t = x.len();
                let ar: f64 = coefficients.iter().enumerate().map(|(i, a)| a * x[t - 1 - i]).sum();
                x.push(intercept + ar + eps.sample(&mut rng));
            }
            x
        }
        SynthKind::DailySinusoid { level, amplitude, noise_sd } => {
            let eps = noise(*noise_sd)?;
            (0..n).map(|t| sinusoid(t, *level, *amplitude) + eps.sample(&mut rng)).collect()
        }
        SynthKind::TwoRegime { weekday, weekend, noise_sd } => {
            let eps = noise(*noise_sd)?;
            let first_weekday = spec.start.weekday().num_days_from_monday() as usize;
            let start_slot = (spec.start.hour() * 4 + spec.start.minute() / 15) as usize;
            (0..n)
                .map(|t| {
                    let abs = start_slot + t;
                    let dow = (first_weekday + abs / SLOTS_PER_DAY) % 7;
                    let (level, amplitude) = if dow >= 5 { *weekend } else { *weekday };
                    sinusoid(abs, level, amplitude) + eps.sample(&mut rng)
                })
                .collect()
        }
        SynthKind::PeriodicExact { period } => {
            if *period == 0 {
                return Err(Error::invalid("period must be at least 1"));
            }
            let pattern: Vec<f64> = (0..*period).map(|_| rng.random_range(50..=500) as f64).collect();
            (0..n).map(|t| pattern[t % period]).collect()
        }
    };
    TimeSeries::new(spec.start, values.into_iter().map(|v| v.max(0.0)).collect())
}
