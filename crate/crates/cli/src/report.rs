//! Report CSV writers.

use std::fs::File;
use std::path::Path;

use anyhow::Context;
use trajacast::dataset::Side;
use trajacast::evaluation::{dm_compare, ModelReport, SummaryRow};
use trajacast::TimeSeries;

fn writer(path: &Path) -> anyhow::Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

fn num(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Shortest round-trip form, switching to exponent notation for tiny values.
fn fmt_f64(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-6 {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

/// One row per query: `model,split,t,timestamp,actual,forecast,lower,upper`.
pub fn write_forecasts(path: &Path, series: &TimeSeries, reports: &[ModelReport]) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    w.write_record(["model", "split", "t", "timestamp", "actual", "forecast", "lower", "upper"])?;
    for r in reports {
        let name = r.display_name();
        for q in &r.records {
            w.write_record([
                name.clone(),
                q.side.to_string(),
                q.target.to_string(),
                series.timestamp(q.target - 1).format(trajacast::ingestion::SERIES_TS_FORMAT).to_string(),
                q.actual.to_string(),
                num(q.forecast),
                num(q.interval.map(|i| i.0)),
                num(q.interval.map(|i| i.1)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

const SUMMARY_HEADER: [&str; 8] = ["model", "split", "mae", "mape", "uc", "winkler", "n", "status"];

fn summary_fields(row: &SummaryRow) -> [String; 6] {
    [
        num(row.point.map(|p| p.mae)),
        num(row.point.and_then(|p| p.mape)),
        num(row.interval.map(|i| i.uc)),
        num(row.interval.map(|i| i.winkler)),
        row.n.to_string(),
        row.status.clone(),
    ]
}

/// Tune and test metrics per model.
pub fn write_summary(path: &Path, reports: &[ModelReport]) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in reports {
        for side in [Side::Tune, Side::Test] {
            let row = r.summarize(side);
            let [a, b, c, d, e, f] = summary_fields(&row);
            w.write_record([row.model.clone(), side.to_string(), a, b, c, d, e, f])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Test metrics per model and hour of day (24 rows per model).
pub fn write_hourly(path: &Path, reports: &[ModelReport]) -> anyhow::Result<()> {
    let mut w = writer(path)?;
    w.write_record(["model", "hour", "mae", "mape", "uc", "winkler", "n", "status"])?;
    for r in reports {
        for (hour, row) in r.hourly(Side::Test).iter().enumerate() {
            let [a, b, c, d, e, f] = summary_fields(row);
            w.write_record([row.model.clone(), hour.to_string(), a, b, c, d, e, f])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Matrices of DM p-values on the test split: absolute-error loss always,
/// Winkler loss when every report carries intervals. Each block covers all
/// hours (`hour = all`) and then each hour of day. Cell (row A, column B)
/// tests A against B; the diagonal is `n/a`, untestable pairs `error`.
pub fn write_dm(path: &Path, reports: &[ModelReport]) -> anyhow::Result<()> {
    let names: Vec<String> = reports.iter().map(ModelReport::display_name).collect();
    let mut w = writer(path)?;
    let mut header = vec!["loss".to_string(), "hour".into(), "model".into()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    let with_winkler = reports.iter().all(|r| r.records.iter().any(|q| q.interval.is_some()));
    let losses: &[(&str, bool)] = if with_winkler {
        &[("abs", false), ("winkler", true)]
    } else {
        &[("abs", false)]
    };
    for &(loss, winkler) in losses {
        for hour in std::iter::once(None).chain((0..24).map(Some)) {
            for (i, a) in reports.iter().enumerate() {
                let mut row = vec![
                    loss.to_string(),
                    hour.map_or("all".into(), |h: usize| h.to_string()),
                    names[i].clone(),
                ];
                for (j, b) in reports.iter().enumerate() {
                    row.push(if i == j {
                        "n/a".into()
                    } else {
                        match dm_compare(a, b, Side::Test, winkler, hour) {
                            Ok(res) => fmt_f64(res.p_value),
                            Err(e) => {
                                log::debug!("DM {} vs {}: {e}", names[i], names[j]);
                                "error".into()
                            }
                        }
                    });
                }
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
