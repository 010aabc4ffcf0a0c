//! Raw station CSV parsing, 5→15 minute aggregation and gap imputation.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Duration, NaiveDateTime, Timelike};

use crate::error::{Error, Result};

/// Slots per day at 15-minute cadence.
pub const SLOTS_PER_DAY: usize = 96;
/// Slots per week at 15-minute cadence.
pub const SLOTS_PER_WEEK: usize = 7 * SLOTS_PER_DAY;
/// Gaps of this many slots (one hour) or more use the three-week mean.
pub const LONG_GAP_SLOTS: usize = 4;

const RAW_CADENCE_SECS: i64 = 5 * 60;
const CADENCE_SECS: i64 = 15 * 60;

/// Timestamp layout used by the canonical series file.
pub const SERIES_TS_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

const KNOWN_TS_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
    "%m/%d/%Y %H:%M:%S",
    "%m/%d/%Y %H:%M",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRecord {
    pub timestamp: NaiveDateTime,
    /// `None` is the missing-marker.
    pub flow: Option<f64>,
}

/// Timestamped flow observations, possibly with missing values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawSeries {
    pub records: Vec<RawRecord>,
}

impl RawSeries {
    pub fn new(mut records: Vec<RawRecord>) -> Result<Self> {
        records.sort_by_key(|r| r.timestamp);
        for pair in records.windows(2) {
            if pair[0].timestamp == pair[1].timestamp {
                return Err(Error::DuplicateTimestamp(pair[0].timestamp.to_string()));
            }
        }
        Ok(Self { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.records.iter().filter(|r| r.flow.is_none()).count()
    }

    pub fn flows(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.flow).collect()
    }
}

/// A gap-free 15-minute series. Index `i` (0-based) is at `start + 15·i` minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    start: NaiveDateTime,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(start: NaiveDateTime, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::insufficient("time series must hold at least one value"));
        }
        if start.second() != 0 || start.nanosecond() != 0 || start.minute() % 15 != 0 {
            return Err(Error::Cadence(format!(
                "series start {start} is not on a 15-minute boundary"
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::invalid(format!(
                "value {v} at index {i} is not a finite non-negative flow"
            )));
        }
        Ok(Self { start, values })
    }

    pub fn start(&self) -> NaiveDateTime {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Timestamp of 0-based index `idx`.
    pub fn timestamp(&self, idx: usize) -> NaiveDateTime {
        self.start + Duration::minutes(15 * idx as i64)
    }

    /// Slot of day (0..96) of the series start.
    pub fn start_slot(&self) -> usize {
        (self.start.hour() * 4 + self.start.minute() / 15) as usize
    }

    /// Slot of day of 0-based index `idx`.
    pub fn slot_of_day(&self, idx: usize) -> usize {
        (self.start_slot() + idx) % SLOTS_PER_DAY
    }

    /// Hour of day of 0-based index `idx`.
    pub fn hour_of_day(&self, idx: usize) -> usize {
        self.slot_of_day(idx) / 4
    }

    /// 0-based index of `ts`, if it lies on the series grid and inside it.
    pub fn index_of(&self, ts: NaiveDateTime) -> Option<usize> {
        let secs = (ts - self.start).num_seconds();
        if secs < 0 || secs % CADENCE_SECS != 0 {
            return None;
        }
        let idx = (secs / CADENCE_SECS) as usize;
        (idx < self.values.len()).then_some(idx)
    }

    /// Replaces the values while keeping the start timestamp.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.start, values)
    }

    /// Writes the canonical `timestamp,flow` CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp", "flow"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([
                self.timestamp(i).format(SERIES_TS_FORMAT).to_string(),
                v.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<series>".into(),
            source: e,
        })?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        self.write_csv(file)
    }

    /// Reads the canonical series file written by [`TimeSeries::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let map = ColumnMap {
            ts_col: "timestamp".into(),
            flow_col: "flow".into(),
            ts_format: Some(SERIES_TS_FORMAT.into()),
            missing_sentinel: None,
        };
        let raw = parse_reader(input, &map)?;
        if raw.missing_count() > 0 {
            return Err(Error::invalid("series file contains missing values"));
        }
        let start = raw.records[0].timestamp;
        for (i, r) in raw.records.iter().enumerate() {
            if r.timestamp != start + Duration::minutes(15 * i as i64) {
                return Err(Error::Cadence(format!(
                    "series file row {} at {} breaks the 15-minute grid",
                    i + 2,
                    r.timestamp
                )));
            }
        }
        Self::new(start, raw.records.iter().filter_map(|r| r.flow).collect())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::read_csv(file)
    }
}

/// Which CSV columns hold the timestamp and flow, and how to read them.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMap {
    pub ts_col: String,
    pub flow_col: String,
    /// chrono format string; `None` tries ISO-8601 and `MM/DD/YYYY HH:MM:SS`.
    pub ts_format: Option<String>,
    /// Cell content treated as missing in addition to the empty cell.
    pub missing_sentinel: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            ts_col: "timestamp".into(),
            flow_col: "flow".into(),
            ts_format: None,
            missing_sentinel: None,
        }
    }
}

fn parse_timestamp(raw: &str, format: Option<&str>) -> Option<NaiveDateTime> {
    let raw = raw.trim();
    match format {
        Some(fmt) => NaiveDateTime::parse_from_str(raw, fmt).ok(),
        None => KNOWN_TS_FORMATS
            .iter()
            .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok()),
    }
}

pub fn parse_csv(path: &Path, columns: &ColumnMap) -> Result<RawSeries> {
    let file = File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_reader(file, columns)
}

/// Parses station CSV from any reader. Unparseable flow cells become
/// missing-markers; unparseable timestamps are errors.
pub fn parse_reader<R: Read>(input: R, columns: &ColumnMap) -> Result<RawSeries> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("column `{name}` not found in header"),
            })
    };
    let ts_idx = find(&columns.ts_col)?;
    let flow_idx = find(&columns.flow_col)?;

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let ts_raw = row.get(ts_idx).unwrap_or_default();
        let timestamp =
            parse_timestamp(ts_raw, columns.ts_format.as_deref()).ok_or_else(|| Error::Parse {
                line,
                message: format!("cannot parse timestamp `{ts_raw}`"),
            })?;
        let cell = row.get(flow_idx).unwrap_or_default().trim();
        let is_sentinel = columns
            .missing_sentinel
            .as_deref()
            .is_some_and(|s| s == cell);
        let flow = if cell.is_empty() || is_sentinel {
            None
        } else {
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite() && *v >= 0.0)
        };
        records.push(RawRecord { timestamp, flow });
    }
    if records.is_empty() {
        return Err(Error::NoRows);
    }
    RawSeries::new(records)
}

/// Lays `raw` onto a dense grid of `step_secs`, starting at `start`.
/// Absent grid points become missing.
fn densify(raw: &RawSeries, start: NaiveDateTime, step_secs: i64) -> Result<Vec<Option<f64>>> {
    let Some(last) = raw.records.last() else {
        return Ok(Vec::new());
    };
    if last.timestamp < start {
        return Ok(Vec::new());
    }
    let n = ((last.timestamp - start).num_seconds() / step_secs) as usize + 1;
    let mut dense = vec![None; n];
    for r in raw.records.iter().filter(|r| r.timestamp >= start) {
        let secs = (r.timestamp - start).num_seconds();
        if secs % step_secs != 0 {
            return Err(Error::Cadence(format!(
                "timestamp {} is off the {}-minute grid",
                r.timestamp,
                step_secs / 60
            )));
        }
        dense[(secs / step_secs) as usize] = r.flow;
    }
    Ok(dense)
}

/// Sums non-overlapping 5-minute triples into 15-minute values.
///
/// The series is first aligned to the next 15-minute boundary; a trailing
/// partial triple is dropped. A triple with any missing input is missing.
pub fn aggregate_15min(raw: &RawSeries) -> Result<RawSeries> {
    let first = raw
        .records
        .first()
        .ok_or_else(|| Error::insufficient("empty raw series"))?
        .timestamp;
    if first.second() != 0 || first.minute() % 5 != 0 {
        return Err(Error::Cadence(format!(
            "cadence not 5 minutes: {first} is off the 5-minute grid"
        )));
    }
    let min_step = raw
        .records
        .windows(2)
        .map(|w| (w[1].timestamp - w[0].timestamp).num_seconds())
        .min();
    if let Some(step) = min_step {
        if step != RAW_CADENCE_SECS {
            return Err(Error::Cadence(format!(
                "cadence not 5 minutes: smallest step is {step} s"
            )));
        }
    }
    let lead = (3 - (first.minute() / 5) % 3) % 3;
    let start = first + Duration::minutes(5 * lead as i64);
    let dense = densify(raw, start, RAW_CADENCE_SECS)?;

    let records = dense
        .chunks_exact(3)
        .enumerate()
        .map(|(i, triple)| RawRecord {
            timestamp: start + Duration::minutes(15 * i as i64),
            flow: match (triple[0], triple[1], triple[2]) {
                (Some(a), Some(b), Some(c)) => Some(a + b + c),
                _ => None,
            },
        })
        .collect();
    Ok(RawSeries { records })
}

/// Counts of slots filled by each imputation rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ImputationReport {
    pub previous_week: usize,
    pub three_week_mean: usize,
}

impl ImputationReport {
    pub fn total(&self) -> usize {
        self.previous_week + self.three_week_mean
    }
}

pub fn impute_missing(raw: &RawSeries) -> Result<TimeSeries> {
    impute_with_report(raw).map(|(ts, _)| ts)
}

/// Fills gaps of a 15-minute series.
///
/// Runs shorter than one hour take the value one week earlier; longer runs
/// take the mean of the values one, two and three weeks earlier. Gaps are
/// processed chronologically, so imputed values may act as donors.
pub fn impute_with_report(raw: &RawSeries) -> Result<(TimeSeries, ImputationReport)> {
    let start = raw
        .records
        .first()
        .ok_or_else(|| Error::insufficient("empty raw series"))?
        .timestamp;
    if let Some(w) = raw
        .records
        .windows(2)
        .find(|w| (w[1].timestamp - w[0].timestamp).num_seconds() % CADENCE_SECS != 0)
    {
        return Err(Error::Cadence(format!(
            "expected 15-minute cadence, found step {} → {}",
            w[0].timestamp, w[1].timestamp
        )));
    }
    let mut slots = densify(raw, start, CADENCE_SECS)?;
    let warmup = 3 * SLOTS_PER_WEEK;
    if let Some(slot) = slots.iter().take(warmup).position(Option::is_none) {
        return Err(Error::MissingInWarmup { slot });
    }

    let mut report = ImputationReport::default();
    let mut i = warmup;
    while i < slots.len() {
        if slots[i].is_some() {
            i += 1;
            continue;
        }
        let run_end = slots[i..]
            .iter()
            .position(Option::is_some)
            .map_or(slots.len(), |off| i + off);
        let run = run_end - i;
        for slot in i..run_end {
            let donor = |weeks: usize| slots[slot - weeks * SLOTS_PER_WEEK];
            let filled = if run < LONG_GAP_SLOTS {
                report.previous_week += 1;
                donor(1)
            } else {
                report.three_week_mean += 1;
                match (donor(1), donor(2), donor(3)) {
                    (Some(a), Some(b), Some(c)) => Some((a + b + c) / 3.0),
                    _ => None,
                }
            };
            slots[slot] = Some(filled.ok_or(Error::NoDonor { slot })?);
        }
        i = run_end;
    }
    let values = slots.into_iter().map(|v| v.unwrap_or_default()).collect();
    Ok((TimeSeries::new(start, values)?, report))
}
