//! Flat `key = value` experiment configuration.
//!
//! Lines starting with `#` are comments. Every key may be overridden on the
//! command line with `--set key=value`. Validation collects all problems
//! before reporting, so one run surfaces every bad key.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use chrono::{NaiveDate, NaiveDateTime};
use trajacast::dataset::{HistoryRule, SplitDates};
use trajacast::gridsearch::{GridSpec, Objective};
use trajacast::ingestion::ColumnMap;
use trajacast::pointcast::HourlyModelBank;
use trajacast::{distances, intervals, outliers, parse_model};

/// Documentation of every key, shown by `--help`.
pub const KEYS_HELP: &str = "\
CONFIG KEYS (flat `key = value` file, `#` comments; override with --set key=value;
relative paths are taken from the config file's directory)
  data            series CSV written by `ingest` or `synth` (timestamp,flow)
  tune_start      first tune query timestamp, e.g. 2021-03-01 or 2021-03-01T00:00
  test_start      first test query timestamp; tune and test splits must be equal in size
  history         test reference history: equal (default) | from-start
  models          comma-separated model specs, e.g. mean, mean+seasonal:3/L=10,
                  m1:f2, m2:g1, m3, localreg, hourly, naive, snaive:96:1, ar:9
  intervals       comma-separated interval specs (hs, hs-s, st, st-s, st-hourly,
                  mdst, mdst-s with optional :params) or `none` (default)
  alpha           interval miscoverage level (default 0.05)
  output          output directory (default out)
  seed            random seed recorded with the run (default 0)
  hourly_bank     hourly model bank CSV used by the `hourly` model
  ar_intercept    fit AR models with an intercept (default true)
  dm              write dm.csv with Diebold-Mariano p-values (default true)
  hourly          write hourly.csv with per-hour test metrics (default false)
  ts_col          ingest: timestamp column (default timestamp)
  flow_col        ingest: flow column (default flow)
  ts_format       ingest: chrono timestamp format (default: ISO-8601 or MM/DD/YYYY)
  missing         ingest: extra cell value treated as missing
  grid.L          tune: window lengths, e.g. 2..20 or 10,14
  grid.K          tune: neighbour counts, e.g. 5..200:5
  grid.R          tune: seasonal radii, `none` for no filter, e.g. none,3,5
  grid.distance   tune: distance specs (default weuclidean)
  grid.model      tune: aggregator families mean, m1, m2, m3, localreg (default mean)
  grid.outlier    tune: outlier policies (default none)
  grid.weight     tune: weight ids f1..f5, g1..g4 (default all)
  grid.h          tune: forecast step (default 1)
  grid.objective  tune: mae (default) | winkler
  grid.folds      tune: cross-validation folds over tune days (default 1)";

const KNOWN_KEYS: &[&str] = &[
    "data",
    "tune_start",
    "test_start",
    "history",
    "models",
    "intervals",
    "alpha",
    "output",
    "seed",
    "hourly_bank",
    "ar_intercept",
    "dm",
    "hourly",
    "ts_col",
    "flow_col",
    "ts_format",
    "missing",
    "grid.L",
    "grid.K",
    "grid.R",
    "grid.distance",
    "grid.model",
    "grid.outlier",
    "grid.weight",
    "grid.h",
    "grid.objective",
    "grid.folds",
];

/// Raw key/value pairs before validation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut raw = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("config line {}: expected key = value, got `{line}`", i + 1);
            };
            raw.entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(raw)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Makes relative `data`, `output` and `hourly_bank` paths (including the
    /// default output directory) relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        self.entries.entry("output".into()).or_insert_with(|| "out".into());
        for key in ["data", "output", "hourly_bank"] {
            if let Some(v) = self.entries.get_mut(key) {
                let p = Path::new(v.as_str());
                if p.is_relative() {
                    *v = base.join(p).to_string_lossy().into_owned();
                }
            }
        }
    }

    /// Applies `key=value` overrides.
    pub fn apply(&mut self, overrides: &[String]) -> anyhow::Result<()> {
        for kv in overrides {
            let Some((k, v)) = kv.split_once('=') else {
                bail!("--set expects key=value, got `{kv}`");
            };
            self.set(k.trim(), v.trim());
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }
}

/// Accumulates validation failures.
#[derive(Debug, Default)]
struct Problems(Vec<String>);

impl Problems {
    fn add(&mut self, key: &str, msg: impl fmt::Display) {
        self.0.push(format!("{key}: {msg}"));
    }
}

fn list(raw: &str) -> Vec<String> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

/// Integer lists: `a,b,c`, ranges `a..b` (inclusive) and `a..b:step`.
pub fn parse_usize_list(raw: &str) -> anyhow::Result<Vec<usize>> {
    let mut out = Vec::new();
    for item in list(raw) {
        if let Some((lo, rest)) = item.split_once("..") {
            let (hi, step) = match rest.split_once(':') {
                Some((hi, step)) => (hi, step.parse::<usize>()?),
                None => (rest, 1),
            };
            let (lo, hi): (usize, usize) = (lo.parse()?, hi.parse()?);
            if step == 0 || lo > hi {
                bail!("bad range `{item}`");
            }
            out.extend((lo..=hi).step_by(step));
        } else {
            out.push(item.parse().with_context(|| format!("`{item}` is not a non-negative integer"))?);
        }
    }
    if out.is_empty() {
        bail!("empty list");
    }
    Ok(out)
}

pub fn parse_timestamp(raw: &str) -> anyhow::Result<NaiveDateTime> {
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Ok(t);
        }
    }
    NaiveDate::parse_from_str(raw, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .with_context(|| format!("`{raw}` is not a date or timestamp"))
}

fn parse_bool(raw: &str) -> anyhow::Result<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => bail!("`{raw}` is not a boolean"),
    }
}

/// Validated experiment settings.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub data: Option<PathBuf>,
    pub split: Option<SplitDates>,
    pub models: Vec<String>,
    pub intervals: Vec<String>,
    pub alpha: f64,
    pub output: PathBuf,
    pub seed: u64,
    pub hourly_bank: Option<HourlyModelBank>,
    pub ar_intercept: bool,
    pub dm: bool,
    pub hourly: bool,
    pub columns: ColumnMap,
    pub grid: GridSpec,
    pub objective: Objective,
    pub folds: usize,
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> anyhow::Result<Self> {
        let mut p = Problems::default();
        for key in raw.entries.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                p.add(key, "unknown key");
            }
        }

        fn value<T: FromStr>(raw: &RawConfig, p: &mut Problems, key: &str, default: T) -> T
        where
            T::Err: fmt::Display,
        {
            match raw.get(key) {
                None => default,
                Some(v) => v.parse().unwrap_or_else(|e| {
                    p.add(key, format!("`{v}`: {e}"));
                    default
                }),
            }
        }
        let flag = |p: &mut Problems, key: &str, default: bool| match raw.get(key) {
            None => default,
            Some(v) => parse_bool(v).unwrap_or_else(|e| {
                p.add(key, e);
                default
            }),
        };

        let alpha: f64 = value(raw, &mut p, "alpha", 0.05);
        if !(alpha > 0.0 && alpha < 1.0) {
            p.add("alpha", format!("must lie in (0, 1), got {alpha}"));
        }
        let seed: u64 = value(raw, &mut p, "seed", 0);
        let ar_intercept = flag(&mut p, "ar_intercept", true);
        let dm = flag(&mut p, "dm", true);
        let hourly = flag(&mut p, "hourly", false);

        let history = match raw.get("history").unwrap_or("equal") {
            "equal" => HistoryRule::EqualHistory,
            "from-start" => HistoryRule::FromStart,
            other => {
                p.add("history", format!("`{other}` is not equal or from-start"));
                HistoryRule::EqualHistory
            }
        };
        let mut stamp = |key: &str| {
            raw.get(key).and_then(|v| {
                parse_timestamp(v)
                    .map_err(|e| p.add(key, e))
                    .ok()
            })
        };
        let tune = stamp("tune_start");
        let test = stamp("test_start");
        let split = match (tune, test) {
            (Some(t), Some(s)) => Some(SplitDates {
                tune_query_start: t,
                test_query_start: s,
                history,
            }),
            _ => None,
        };

        let hourly_bank = raw.get("hourly_bank").and_then(|path| {
            HourlyModelBank::load(Path::new(path))
                .map_err(|e| p.add("hourly_bank", e))
                .ok()
        });

        let models = list(raw.get("models").unwrap_or("mean"));
        if models.is_empty() {
            p.add("models", "no model given");
        }
        for m in &models {
            if m == "hourly" && hourly_bank.is_none() {
                if raw.get("hourly_bank").is_none() {
                    p.add("models", "`hourly` needs hourly_bank");
                }
                continue;
            }
            if let Err(e) = parse_model(m, hourly_bank.as_ref(), Some(ar_intercept)) {
                p.add("models", format!("`{m}`: {e}"));
            }
        }
        let intervals: Vec<String> = list(raw.get("intervals").unwrap_or("none"))
            .into_iter()
            .filter(|s| s != "none")
            .collect();
        for i in &intervals {
            if let Err(e) = intervals::parse(i) {
                p.add("intervals", format!("`{i}`: {e}"));
            }
        }

        let columns = ColumnMap {
            ts_col: raw.get("ts_col").unwrap_or("timestamp").to_string(),
            flow_col: raw.get("flow_col").unwrap_or("flow").to_string(),
            ts_format: raw.get("ts_format").map(String::from),
            missing_sentinel: raw.get("missing").map(String::from),
        };

        let mut grid = GridSpec::default();
        let usizes = |p: &mut Problems, key: &str, target: &mut Vec<usize>| {
            if let Some(v) = raw.get(key) {
                match parse_usize_list(v) {
                    Ok(xs) => *target = xs,
                    Err(e) => p.add(key, format!("`{v}`: {e}")),
                }
            }
        };
        usizes(&mut p, "grid.L", &mut grid.windows);
        usizes(&mut p, "grid.K", &mut grid.ks);
        if let Some(v) = raw.get("grid.R") {
            let mut radii = Vec::new();
            for item in list(v) {
                if item == "none" {
                    radii.push(None);
                } else {
                    match parse_usize_list(&item) {
                        Ok(xs) => radii.extend(xs.into_iter().map(Some)),
                        Err(e) => p.add("grid.R", format!("`{item}`: {e}")),
                    }
                }
            }
            grid.radii = radii;
        }
        if let Some(v) = raw.get("grid.distance") {
            grid.distances = list(v);
            for d in &grid.distances {
                if let Err(e) = distances::parse(d) {
                    p.add("grid.distance", e);
                }
            }
        }
        if let Some(v) = raw.get("grid.outlier") {
            grid.outliers = list(v);
            for o in &grid.outliers {
                if let Err(e) = outliers::parse(o) {
                    p.add("grid.outlier", e);
                }
            }
        }
        if let Some(v) = raw.get("grid.model") {
            grid.models = list(v);
        }
        if let Some(v) = raw.get("grid.weight") {
            grid.weights = list(v);
        }
        grid.step = value(raw, &mut p, "grid.h", 1);
        if let Err(e) = grid.cells() {
            p.add("grid", e);
        }
        let objective = match raw.get("grid.objective").unwrap_or("mae") {
            "mae" => Objective::Mae,
            "winkler" => Objective::Winkler { alpha },
            other => {
                p.add("grid.objective", format!("`{other}` is not mae or winkler"));
                Objective::Mae
            }
        };
        let folds: usize = value(raw, &mut p, "grid.folds", 1);
        if folds == 0 {
            p.add("grid.folds", "must be at least 1");
        }

        if !p.0.is_empty() {
            bail!("invalid configuration:\n  {}", p.0.join("\n  "));
        }
        Ok(Self {
            data: raw.get("data").map(PathBuf::from),
            split,
            models,
            intervals,
            alpha,
            output: PathBuf::from(raw.get("output").unwrap_or("out")),
            seed,
            hourly_bank,
            ar_intercept,
            dm,
            hourly,
            columns,
            grid,
            objective,
            folds,
        })
    }

    pub fn data(&self) -> anyhow::Result<&Path> {
        self.data.as_deref().context("config key `data` is required")
    }

    pub fn split(&self) -> anyhow::Result<&SplitDates> {
        self.split.as_ref().context("config keys `tune_start` and `test_start` are required")
    }
}
