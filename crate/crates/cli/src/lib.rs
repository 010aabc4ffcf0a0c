//! Command-line driver: ingest → split → tune → run → compare.
//!
//! Each subcommand is a plain function so tests can call it in-process.

pub mod config;
pub mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use chrono::NaiveDateTime;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use trajacast::dataset::{Side, SplitPlan};
use trajacast::evaluation::{evaluate, ModelReport, QueryRecord};
use trajacast::gridsearch::{run_cv, tune_hourly};
use trajacast::ingestion::{aggregate_15min, impute_with_report, parse_csv, SERIES_TS_FORMAT};
use trajacast::synthdata::{generate, SynthKind, SynthSpec};
use trajacast::{intervals, parse_model, EvalContext, TimeSeries};

pub use config::{ExperimentConfig, RawConfig, KEYS_HELP};

#[derive(Debug, Parser)]
#[command(name = "trajacast", version, about = "Trajectory-similarity traffic flow forecasting", after_help = KEYS_HELP)]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, env = "TRAJACAST_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Aggregate and impute a raw station CSV into a 15-minute series file.
    Ingest(IngestArgs),
    /// Generate a synthetic series file.
    Synth(SynthArgs),
    /// Show the tune/test split for a config.
    #[command(after_help = KEYS_HELP)]
    Split(ConfigArgs),
    /// Grid-search similarity hyperparameters on the tune split.
    #[command(after_help = KEYS_HELP)]
    Tune(ConfigArgs),
    /// Evaluate models and intervals and write report CSVs.
    #[command(after_help = KEYS_HELP)]
    Run(RunArgs),
    /// Diebold-Mariano matrix from one or more forecasts.csv files.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override a config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Shorthand for `--set hourly=true` (per-hour tuning or reports).
    #[arg(long)]
    pub hourly: bool,
}

impl ConfigArgs {
    pub fn resolve(&self) -> anyhow::Result<RawConfig> {
        let mut raw = match &self.config {
            Some(p) => RawConfig::load(p)?,
            None => RawConfig::default(),
        };
        raw.apply(&self.set)?;
        if let Some(dir) = self.config.as_deref().and_then(|p| p.parent()) {
            raw.resolve_paths(dir);
        }
        if self.hourly {
            raw.set("hourly", "true");
        }
        Ok(raw)
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Interval miscoverage level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Write the DM p-value matrix even when the config sets `dm = false`.
    #[arg(long)]
    pub dm: bool,
    /// Fit AR benchmarks without an intercept.
    #[arg(long)]
    pub ar_no_intercept: bool,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    /// Raw station CSV.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Series file to write.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Optional config supplying ts_col, flow_col, ts_format, missing.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub ts_col: Option<String>,
    #[arg(long)]
    pub flow_col: Option<String>,
    /// chrono format of the timestamp column.
    #[arg(long)]
    pub ts_format: Option<String>,
    /// Cell value treated as missing.
    #[arg(long)]
    pub missing: Option<String>,
    /// Input is already at 15-minute cadence.
    #[arg(long)]
    pub already_15min: bool,
    /// Report path (default: `<output>.report.txt`).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKindArg {
    Ar,
    DailySinusoid,
    TwoRegime,
    PeriodicExact,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKindArg,
    /// Number of 15-minute slots.
    #[arg(long)]
    pub length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// First timestamp (default 2021-01-04T00:00:00, a Monday).
    #[arg(long)]
    pub start: Option<String>,
    /// periodic-exact: pattern length.
    #[arg(long, default_value_t = 96)]
    pub period: usize,
    /// daily-sinusoid / two-regime weekday level.
    #[arg(long, default_value_t = 400.0)]
    pub level: f64,
    /// daily-sinusoid / two-regime weekday amplitude.
    #[arg(long, default_value_t = 300.0)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 150.0)]
    pub weekend_level: f64,
    #[arg(long, default_value_t = 100.0)]
    pub weekend_amplitude: f64,
    #[arg(long, default_value_t = 20.0)]
    pub noise_sd: f64,
    /// ar: comma-separated coefficients a_1..a_p.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub coefficients: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub intercept: f64,
    /// ar: initial values, oldest first (default: p copies of the level).
    #[arg(long, value_delimiter = ',')]
    pub init: Vec<f64>,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// forecasts.csv files written by `run`.
    #[arg(required = true)]
    pub forecasts: Vec<PathBuf>,
    /// Output directory for dm.csv.
    #[arg(long, short, default_value = "out")]
    pub output: PathBuf,
    /// Level of the intervals in the files (for Winkler losses).
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Forecast step h of the compared models.
    #[arg(long, default_value_t = 1)]
    pub step: usize,
}

/// Runs `f` on a rayon pool of `jobs` workers (all cores when `None`).
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            bail!("--jobs must be at least 1");
        }
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?.install(f))
}

/// Dispatches a parsed command line. Returns the process exit code.
pub fn execute(cli: Cli) -> anyhow::Result<i32> {
    let jobs = cli.jobs;
    with_jobs(jobs, move || match cli.command {
        Command::Ingest(a) => cmd_ingest(&a).map(|r| {
            print!("{}", r.render());
            0
        }),
        Command::Synth(a) => cmd_synth(&a).map(|_| 0),
        Command::Split(a) => {
            let cfg = ExperimentConfig::from_raw(&a.resolve()?)?;
            print!("{}", cmd_split(&cfg)?);
            Ok(0)
        }
        Command::Tune(a) => {
            let cfg = ExperimentConfig::from_raw(&a.resolve()?)?;
            let out = cmd_tune(&cfg)?;
            for line in &out.selections {
                println!("{line}");
            }
            Ok(0)
        }
        Command::Run(a) => {
            let mut raw = a.config.resolve()?;
            if let Some(alpha) = a.alpha {
                raw.set("alpha", &alpha.to_string());
            }
            if a.dm {
                raw.set("dm", "true");
            }
            if a.ar_no_intercept {
                raw.set("ar_intercept", "false");
            }
            let cfg = ExperimentConfig::from_raw(&raw)?;
            let out = cmd_run(&cfg)?;
            for (name, status) in &out.statuses {
                println!("{name}: {status}");
            }
            Ok(if out.all_ok { 0 } else { 1 })
        }
        Command::Compare(a) => cmd_compare(&a).map(|_| 0),
    })?
}

// ---------------------------------------------------------------------------
// ingest / synth

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestReport {
    pub rows: usize,
    pub slots: usize,
    pub previous_week: usize,
    pub three_week_mean: usize,
}

impl IngestReport {
    pub fn render(&self) -> String {
        format!(
            "rows: {}\nslots: {}\nimputed: {}\nimputed(previous-week): {}\nimputed(three-week-mean): {}\n",
            self.rows,
            self.slots,
            self.previous_week + self.three_week_mean,
            self.previous_week,
            self.three_week_mean
        )
    }
}

pub fn cmd_ingest(args: &IngestArgs) -> anyhow::Result<IngestReport> {
    let mut raw_cfg = match &args.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    for (key, v) in [
        ("ts_col", &args.ts_col),
        ("flow_col", &args.flow_col),
        ("ts_format", &args.ts_format),
        ("missing", &args.missing),
    ] {
        if let Some(v) = v {
            raw_cfg.set(key, v);
        }
    }
    let cfg = ExperimentConfig::from_raw(&raw_cfg)?;
    let input = &args.input;
    let raw = parse_csv(input, &cfg.columns).with_context(|| format!("ingesting {}", input.display()))?;
    let slots = if args.already_15min {
        raw.clone()
    } else {
        aggregate_15min(&raw).with_context(|| format!("aggregating {}", input.display()))?
    };
    let (series, imputed) = impute_with_report(&slots).with_context(|| format!("imputing {}", input.display()))?;
    series.save(&args.output)?;
    let report = IngestReport {
        rows: raw.len(),
        slots: series.len(),
        previous_week: imputed.previous_week,
        three_week_mean: imputed.three_week_mean,
    };
    let report_path = args.report.clone().unwrap_or_else(|| {
        let mut p = args.output.clone().into_os_string();
        p.push(".report.txt");
        PathBuf::from(p)
    });
    fs::write(&report_path, report.render()).with_context(|| format!("writing {}", report_path.display()))?;
    info!("wrote {} slots to {}", series.len(), args.output.display());
    Ok(report)
}

pub fn cmd_synth(args: &SynthArgs) -> anyhow::Result<TimeSeries> {
    let kind = match args.kind {
        SynthKindArg::Ar => SynthKind::Ar {
            init: if args.init.is_empty() {
                vec![args.level; args.coefficients.len()]
            } else {
                args.init.clone()
            },
            coefficients: args.coefficients.clone(),
            intercept: args.intercept,
            noise_sd: args.noise_sd,
        },
        SynthKindArg::DailySinusoid => SynthKind::DailySinusoid {
            level: args.level,
            amplitude: args.amplitude,
            noise_sd: args.noise_sd,
        },
        SynthKindArg::TwoRegime => SynthKind::TwoRegime {
            weekday: (args.level, args.amplitude),
            weekend: (args.weekend_level, args.weekend_amplitude),
            noise_sd: args.noise_sd,
        },
        SynthKindArg::PeriodicExact => SynthKind::PeriodicExact { period: args.period },
    };
    let mut spec = SynthSpec::new(kind, args.length, args.seed);
    if let Some(s) = &args.start {
        spec.start = config::parse_timestamp(s)?;
    }
    let series = generate(&spec)?;
    series.save(&args.output)?;
    Ok(series)
}

// ---------------------------------------------------------------------------
// split / tune / run

fn load_plan(cfg: &ExperimentConfig) -> anyhow::Result<(TimeSeries, SplitPlan)> {
    let data = cfg.data()?;
    let series = TimeSeries::load(data).with_context(|| format!("loading {}", data.display()))?;
    let plan = SplitPlan::from_dates(&series, cfg.split()?)?;
    Ok((series, plan))
}

fn stamp(series: &TimeSeries, t: usize) -> String {
    series.timestamp(t - 1).format(SERIES_TS_FORMAT).to_string()
}

pub fn cmd_split(cfg: &ExperimentConfig) -> anyhow::Result<String> {
    let (series, plan) = load_plan(cfg)?;
    let tune = plan.targets(Side::Tune);
    let test = plan.targets(Side::Test);
    Ok(format!(
        "observations: {}\ntune targets: {}..={} ({} .. {}), {} queries\ntest targets: {}..={} ({} .. {}), {} queries\ntest reference floor: {}\n",
        plan.total,
        tune.start(),
        tune.end(),
        stamp(&series, *tune.start()),
        stamp(&series, *tune.end()),
        plan.tune_len(),
        test.start(),
        test.end(),
        stamp(&series, *test.start()),
        stamp(&series, *test.end()),
        plan.test_len(),
        plan.test_floor(),
    ))
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    /// Selected model specs, one per line (per hour with `hourly`).
    pub selections: Vec<String>,
    pub files: Vec<PathBuf>,
}

pub fn cmd_tune(cfg: &ExperimentConfig) -> anyhow::Result<TuneOutcome> {
    let (series, plan) = load_plan(cfg)?;
    let ctx = EvalContext::new(&series, &plan)?;
    fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))?;
    let cells = cfg.grid.cells()?.len();
    info!("tuning {cells} grid cells, objective {}, {} fold(s)", cfg.objective, cfg.folds);
    let mut out = TuneOutcome { selections: Vec::new(), files: Vec::new() };
    if cfg.hourly {
        let (bank, boards) = tune_hourly(&cfg.grid, &ctx, cfg.folds, cfg.objective)?;
        let dir = cfg.output.join("leaderboards");
        fs::create_dir_all(&dir)?;
        for (hour, board) in boards.iter().enumerate() {
            let path = dir.join(format!("hour_{hour:02}.csv"));
            board.write_csv(fs::File::create(&path)?)?;
            out.files.push(path);
        }
        let path = cfg.output.join("hourly_bank.csv");
        bank.save(&path)?;
        out.files.push(path);
        out.selections = bank.entries().iter().enumerate().map(|(h, p)| format!("hour {h:02}: {p}")).collect();
    } else {
        let board = run_cv(&cfg.grid, &ctx, cfg.folds, cfg.objective)?;
        let path = cfg.output.join("leaderboard.csv");
        board.write_csv(fs::File::create(&path)?)?;
        out.files.push(path);
        let best = board.selection().context("every grid cell failed; see leaderboard.csv")?;
        out.selections.push(format!("selected: {}", best.params));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub statuses: Vec<(String, String)>,
    pub all_ok: bool,
}

/// Evaluates every model × interval combination of the config.
pub fn evaluate_config(cfg: &ExperimentConfig, series: &TimeSeries, plan: &SplitPlan) -> anyhow::Result<Vec<ModelReport>> {
    let ctx = EvalContext::new(series, plan)?;
    let mut reports = Vec::new();
    let interval_specs: Vec<Option<&str>> = if cfg.intervals.is_empty() {
        vec![None]
    } else {
        cfg.intervals.iter().map(|s| Some(s.as_str())).collect()
    };
    for spec in &cfg.models {
        for ispec in &interval_specs {
            let mut model = parse_model(spec, cfg.hourly_bank.as_ref(), Some(cfg.ar_intercept))?;
            let method = ispec.map(intervals::parse).transpose()?;
            info!("evaluating {spec}{}", ispec.map(|i| format!(" with {i}")).unwrap_or_default());
            reports.push(evaluate(&ctx, model.as_mut(), method.as_deref(), cfg.alpha));
        }
    }
    Ok(reports)
}

pub fn cmd_run(cfg: &ExperimentConfig) -> anyhow::Result<RunOutcome> {
    let (series, plan) = load_plan(cfg)?;
    let reports = evaluate_config(cfg, &series, &plan)?;
    fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))?;
    let mut files = vec![cfg.output.join("forecasts.csv"), cfg.output.join("summary.csv")];
    report::write_forecasts(&files[0], &series, &reports)?;
    report::write_summary(&files[1], &reports)?;
    if cfg.dm {
        let path = cfg.output.join("dm.csv");
        report::write_dm(&path, &reports)?;
        files.push(path);
    }
    if cfg.hourly {
        let path = cfg.output.join("hourly.csv");
        report::write_hourly(&path, &reports)?;
        files.push(path);
    }
    let statuses: Vec<(String, String)> = reports
        .iter()
        .map(|r| {
            let test = r.summarize(Side::Test);
            let tune = r.summarize(Side::Tune);
            let status = if tune.status != "ok" { tune.status } else { test.status };
            (r.display_name(), status)
        })
        .collect();
    Ok(RunOutcome {
        all_ok: reports.iter().all(ModelReport::is_ok),
        files,
        statuses,
    })
}

// ---------------------------------------------------------------------------
// compare

/// Rebuilds reports from forecasts.csv files, keeping the targets every
/// model has a row for.
pub fn read_forecasts(paths: &[PathBuf], alpha: f64, step: usize) -> anyhow::Result<Vec<ModelReport>> {
    let mut order: Vec<String> = Vec::new();
    let mut rows: BTreeMap<String, BTreeMap<usize, QueryRecord>> = BTreeMap::new();
    for path in paths {
        let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let at = |j: usize| rec.get(j).unwrap_or_default();
            let ctx = || format!("{} line {}", path.display(), i + 2);
            let opt = |j: usize| -> anyhow::Result<Option<f64>> {
                let s = at(j);
                if s.is_empty() {
                    Ok(None)
                } else {
                    Ok(Some(s.parse().with_context(ctx)?))
                }
            };
            let model = at(0).to_string();
            let side = match at(1) {
                "tune" => Side::Tune,
                "test" => Side::Test,
                other => bail!("{}: unknown split `{other}`", ctx()),
            };
            let target: usize = at(2).parse().with_context(ctx)?;
            let ts = NaiveDateTime::parse_from_str(at(3), SERIES_TS_FORMAT).with_context(ctx)?;
            let hour = chrono::Timelike::hour(&ts) as usize;
            let forecast = opt(5)?;
            let interval = match (opt(6)?, opt(7)?) {
                (Some(l), Some(u)) => Some((l, u)),
                _ => None,
            };
            let record = QueryRecord {
                target,
                side,
                hour,
                actual: at(4).parse().with_context(ctx)?,
                forecast,
                interval,
                regularized: false,
                error: forecast.is_none().then(|| "no forecast".to_string()),
            };
            if !rows.contains_key(&model) {
                order.push(model.clone());
            }
            rows.entry(model).or_default().insert(target, record);
        }
    }
    if order.is_empty() {
        bail!("no forecast rows found");
    }
    let common: Vec<usize> = rows[&order[0]]
        .keys()
        .copied()
        .filter(|t| rows.values().all(|m| m.contains_key(t)))
        .collect();
    Ok(order
        .into_iter()
        .map(|name| {
            let m = &rows[&name];
            ModelReport {
                records: common.iter().map(|t| m[t].clone()).collect(),
                label: name,
                interval: None,
                alpha,
                step,
                fit_error: None,
            }
        })
        .collect())
}

pub fn cmd_compare(args: &CompareArgs) -> anyhow::Result<PathBuf> {
    let reports = read_forecasts(&args.forecasts, args.alpha, args.step)?;
    if reports.len() < 2 {
        bail!("compare needs at least two models, found {}", reports.len());
    }
    fs::create_dir_all(&args.output)?;
    let path = args.output.join("dm.csv");
    report::write_dm(&path, &reports)?;
    Ok(path)
}

