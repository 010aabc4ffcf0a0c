//! Hyperparameter sweeps over the similarity model.
//!
//! Candidates are searched once per (distance, L, R) group with the largest
//! K of the grid; every cell then truncates them, which is exact because
//! K-nearest selection is prefix-stable. Selection uses tune queries only.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dataset::Side;
use crate::error::{Error, Result};
use crate::forecaster::EvalContext;
use crate::intervals::st_interval;
use crate::metrics::winkler_score;
use crate::neighbors::CandidateSet;
use crate::pointcast::{DistanceFn, HourlyModelBank, HyperParams, RankFn, SimilarityForecaster};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub windows: Vec<usize>,
    pub ks: Vec<usize>,
    pub radii: Vec<Option<usize>>,
    pub distances: Vec<String>,
    /// Aggregator families: `mean`, `m1`, `m2`, `m3`, `localreg`.
    pub models: Vec<String>,
    pub outliers: Vec<String>,
    /// Weight ids tried for `m1` (`f1`…`f5`) and `m2` (`g1`…`g4`).
    pub weights: Vec<String>,
    pub step: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            windows: (2..=20).collect(),
            ks: (5..=200).step_by(5).collect(),
            radii: vec![None],
            distances: vec!["weuclidean".into()],
            models: vec!["mean".into()],
            outliers: vec!["none".into()],
            weights: RankFn::ALL
                .iter()
                .map(|f| f.id().to_string())
                .chain(DistanceFn::ALL.iter().map(|g| g.id().to_string()))
                .collect(),
            step: 1,
        }
    }
}

impl GridSpec {
    /// One grid cell per hyperparameter combination, in a fixed order.
    pub fn cells(&self) -> Result<Vec<HyperParams>> {
        let empty = [
            ("L", self.windows.is_empty()),
            ("K", self.ks.is_empty()),
            ("R", self.radii.is_empty()),
            ("distance", self.distances.is_empty()),
            ("model", self.models.is_empty()),
            ("outlier", self.outliers.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::invalid(format!("grid has no {name} values")));
        }
        let mut aggregators = Vec::new();
        for family in &self.models {
            let picks: Vec<String> = match family.as_str() {
                "m1" => self.weights.iter().filter(|w| RankFn::from_str(w).is_ok()).map(|w| format!("m1:{w}")).collect(),
                "m2" => self.weights.iter().filter(|w| DistanceFn::from_str(w).is_ok()).map(|w| format!("m2:{w}")).collect(),
                "mean" | "m3" | "localreg" => vec![family.clone()],
                other => return Err(Error::invalid(format!("unknown model family `{other}` in grid"))),
            };
            if picks.is_empty() {
                return Err(Error::invalid(format!("grid model {family} has no matching weight ids")));
            }
            aggregators.extend(picks);
        }
        let mut cells = Vec::new();
        for distance in &self.distances {
            for &window in &self.windows {
                for &radius in &self.radii {
                    for &k in &self.ks {
                        for outlier in &self.outliers {
                            for aggregator in &aggregators {
                                cells.push(HyperParams {
                                    distance: distance.clone(),
                                    window,
                                    k,
                                    radius,
                                    outlier: outlier.clone(),
                                    aggregator: aggregator.clone(),
                                    step: self.step,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    Mae,
    /// Mean Winkler score of ST intervals from each cell's candidates.
    Winkler { alpha: f64 },
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Mae => write!(f, "mae"),
            Objective::Winkler { .. } => write!(f, "winkler"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderboardRow {
    pub params: HyperParams,
    pub tune_metric: Option<f64>,
    pub test_metric: Option<f64>,
    pub status: String,
}

impl LeaderboardRow {
    pub fn family(&self) -> &str {
        self.params.aggregator.split(':').next().unwrap_or_default()
    }

    pub fn weight_fn(&self) -> Option<&str> {
        self.params.aggregator.split_once(':').map(|(_, w)| w)
    }

    fn key(&self) -> (&str, &str, usize, usize, Option<usize>, &str) {
        let p = &self.params;
        (&p.aggregator, &p.distance, p.window, p.k, p.radius, &p.outlier)
    }
}

/// Grid rows sorted by tune metric; failed cells last.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaderboard {
    pub objective: Objective,
    pub rows: Vec<LeaderboardRow>,
}

impl Leaderboard {
    pub fn new(objective: Objective, mut rows: Vec<LeaderboardRow>) -> Self {
        rows.sort_by(|a, b| match (a.tune_metric, b.tune_metric) {
            (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.key().cmp(&b.key())),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => a.key().cmp(&b.key()),
        });
        Self { objective, rows }
    }

    /// The tune-optimal row.
    pub fn selection(&self) -> Option<&LeaderboardRow> {
        self.rows.first().filter(|r| r.tune_metric.is_some())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "rank", "model", "distance", "L", "K", "R", "outlier", "weight_fn", "tune_metric", "test_metric", "status",
        ])?;
        for (i, r) in self.rows.iter().enumerate() {
            let p = &r.params;
            w.write_record([
                (i + 1).to_string(),
                r.family().to_string(),
                p.distance.clone(),
                p.window.to_string(),
                p.k.to_string(),
                p.radius.map(|r| r.to_string()).unwrap_or_default(),
                p.outlier.clone(),
                r.weight_fn().unwrap_or_default().to_string(),
                fmt_opt(r.tune_metric),
                fmt_opt(r.test_metric),
                r.status.clone(),
            ])?;
        }
        w.flush().map_err(|e| Error::Io { path: "<leaderboard>".into(), source: e })?;
        Ok(())
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Splits the tune targets into `folds` contiguous blocks of whole days.
pub fn fold_blocks(ctx: &EvalContext<'_>, folds: usize) -> Result<Vec<Vec<usize>>> {
    if folds == 0 {
        return Err(Error::invalid("need at least one fold"));
    }
    let mut days: Vec<Vec<usize>> = Vec::new();
    let mut last_day = None;
    for t in ctx.tune_targets() {
        let day = ctx.series.timestamp(t - 1).date();
        if last_day != Some(day) {
            days.push(Vec::new());
            last_day = Some(day);
        }
        days.last_mut().expect("pushed above").push(t);
    }
    if days.len() < folds {
        return Err(Error::insufficient(format!(
            "{} tune days cannot form {folds} day-block folds",
            days.len()
        )));
    }
    let (base, extra) = (days.len() / folds, days.len() % folds);
    let mut blocks = Vec::with_capacity(folds);
    let mut it = days.into_iter();
    for f in 0..folds {
        let take = base + usize::from(f < extra);
        blocks.push(it.by_ref().take(take).flatten().collect());
    }
    Ok(blocks)
}

/// Per-target losses of one cell: tune losses in the order of the blocks'
/// concatenation, then test losses in target order.
#[derive(Debug, Clone)]
struct CellLosses {
    tune: Vec<Vec<f64>>,
    test: Vec<f64>,
}

struct Group<'a> {
    tune: Vec<usize>,
    test: Vec<usize>,
    /// Raw candidates per target, tune block order then test.
    raw: Vec<std::result::Result<CandidateSet, String>>,
    blocks: &'a [Vec<usize>],
}

fn group_key(p: &HyperParams) -> (String, usize, Option<usize>) {
    (p.distance.clone(), p.window, p.radius)
}

fn build_group<'a>(ctx: &EvalContext<'_>, any: &HyperParams, k_max: usize, blocks: &'a [Vec<usize>]) -> Result<Group<'a>> {
    let searcher = SimilarityForecaster::new(HyperParams {
        k: k_max,
        outlier: "none".into(),
        aggregator: "mean".into(),
        ..any.clone()
    })?;
    let tune: Vec<usize> = blocks.iter().flatten().copied().collect();
    let test: Vec<usize> = ctx.targets(Side::Test).collect();
    let raw = tune
        .par_iter()
        .chain(test.par_iter())
        .map(|&t| searcher.raw_candidates(ctx, t, k_max).map_err(|e| format!("t={t}: {e}")))
        .collect();
    Ok(Group { tune, test, raw, blocks })
}

fn cell_losses(ctx: &EvalContext<'_>, group: &Group<'_>, params: &HyperParams, objective: Objective) -> Result<CellLosses> {
    let model = SimilarityForecaster::new(params.clone())?;
    let refined: Vec<CandidateSet> = group
        .raw
        .par_iter()
        .map(|raw| match raw {
            Ok(c) => model.refine(c),
            Err(e) => Err(Error::invalid(e.clone())),
        })
        .collect::<Result<_>>()?;
    let n_tune = group.tune.len();
    let (tune_c, test_c) = refined.split_at(n_tune);

    let loss = |m: &SimilarityForecaster, t: usize, c: &CandidateSet| -> Result<f64> {
        let x = ctx.actual(t);
        match objective {
            Objective::Mae => Ok((m.aggregate(ctx, t, c)?.value - x).abs()),
            Objective::Winkler { alpha } => Ok(winkler_score(&st_interval(c, alpha)?, x)),
        }
    };
    let score = |m: &SimilarityForecaster, targets: &[usize], cands: &[CandidateSet]| -> Result<Vec<f64>> {
        targets
            .par_iter()
            .zip(cands.par_iter())
            .map(|(&t, c)| loss(m, t, c))
            .collect()
    };
    let train = |exclude: Option<usize>| -> Result<SimilarityForecaster> {
        let mut m = SimilarityForecaster::new(params.clone())?;
        if m.aggregator().needs_training() && objective == Objective::Mae {
            let mut examples = Vec::new();
            let mut offset = 0;
            for (b, block) in group.blocks.iter().enumerate() {
                if Some(b) != exclude {
                    for (i, &t) in block.iter().enumerate() {
                        examples.push((tune_c[offset + i].clone(), ctx.actual(t)));
                    }
                }
                offset += block.len();
            }
            m.train_on(&examples)?;
        }
        Ok(m)
    };

    let full = train(None)?;
    let single = group.blocks.len() == 1;
    let mut tune = Vec::with_capacity(group.blocks.len());
    let mut offset = 0;
    for (b, block) in group.blocks.iter().enumerate() {
        let m = if single { None } else { Some(train(Some(b))?) };
        let range = offset..offset + block.len();
        tune.push(score(m.as_ref().unwrap_or(&full), block, &tune_c[range])?);
        offset += block.len();
    }
    let test = score(&full, &group.test, test_c)?;
    Ok(CellLosses { tune, test })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Mean over folds of each fold's mean loss (folds without data skipped).
fn fold_metric<'a>(folds: impl Iterator<Item = Vec<f64>> + 'a) -> Option<f64> {
    let means: Vec<f64> = folds.filter_map(|f| mean(&f)).collect();
    mean(&means)
}

/// Evaluates every cell once; `None` losses carry the failure message.
fn evaluate_cells(
    ctx: &EvalContext<'_>,
    spec: &GridSpec,
    blocks: &[Vec<usize>],
    objective: Objective,
) -> Result<Vec<(HyperParams, std::result::Result<CellLosses, String>)>> {
    let cells = spec.cells()?;
    let k_max = *spec.ks.iter().max().expect("validated non-empty");
    let groups: BTreeSet<(String, usize, Option<usize>)> = cells.iter().map(group_key).collect();
    let mut out: Vec<(HyperParams, std::result::Result<CellLosses, String>)> = Vec::with_capacity(cells.len());
    for key in groups {
        let members: Vec<&HyperParams> = cells.iter().filter(|c| group_key(c) == key).collect();
        let results: Vec<_> = match build_group(ctx, members[0], k_max, blocks) {
            Ok(group) => members
                .par_iter()
                .map(|p| ((*p).clone(), cell_losses(ctx, &group, p, objective).map_err(|e| e.to_string())))
                .collect(),
            Err(e) => members.iter().map(|p| ((*p).clone(), Err(e.to_string()))).collect(),
        };
        out.extend(results);
    }
    // restore the spec's cell order so reductions never depend on grouping
    let order: std::collections::HashMap<&HyperParams, usize> =
        cells.iter().enumerate().map(|(i, c)| (c, i)).collect();
    out.sort_by_key(|(p, _)| order[p]);
    Ok(out)
}

fn leaderboard_from(
    objective: Objective,
    results: &[(HyperParams, std::result::Result<CellLosses, String>)],
    keep: impl Fn(usize) -> bool + Sync,
    tune_hours: &[Vec<usize>],
    test_hours: &[usize],
) -> Leaderboard {
    let rows = results
        .iter()
        .map(|(params, res)| match res {
            Ok(l) => {
                let tune = fold_metric(l.tune.iter().zip(tune_hours).map(|(fold, hours)| {
                    fold.iter().zip(hours).filter(|(_, h)| keep(**h)).map(|(v, _)| *v).collect()
                }));
                let test: Vec<f64> = l.test.iter().zip(test_hours).filter(|(_, h)| keep(**h)).map(|(v, _)| *v).collect();
                LeaderboardRow {
                    params: params.clone(),
                    tune_metric: tune,
                    test_metric: mean(&test),
                    status: if tune.is_some() { "ok".into() } else { "error: no tune queries".into() },
                }
            }
            Err(e) => LeaderboardRow {
                params: params.clone(),
                tune_metric: None,
                test_metric: None,
                status: format!("error: {e}"),
            },
        })
        .collect();
    Leaderboard::new(objective, rows)
}

fn hours_of(ctx: &EvalContext<'_>, targets: &[usize]) -> Vec<usize> {
    targets.iter().map(|&t| ctx.series.hour_of_day(t - 1)).collect()
}

/// Cross-validated leaderboard over explicit tune blocks. One block gives
/// the plain tune metric.
pub fn run_cv_blocks(
    spec: &GridSpec,
    ctx: &EvalContext<'_>,
    blocks: &[Vec<usize>],
    objective: Objective,
) -> Result<Leaderboard> {
    let results = evaluate_cells(ctx, spec, blocks, objective)?;
    let tune_hours: Vec<Vec<usize>> = blocks.iter().map(|b| hours_of(ctx, b)).collect();
    let test: Vec<usize> = ctx.targets(Side::Test).collect();
    Ok(leaderboard_from(objective, &results, |_| true, &tune_hours, &hours_of(ctx, &test)))
}

/// Evaluates every cell on the tune queries (and reports the test metric).
pub fn run_grid(spec: &GridSpec, ctx: &EvalContext<'_>, objective: Objective) -> Result<Leaderboard> {
    let all: Vec<usize> = ctx.tune_targets().collect();
    run_cv_blocks(spec, ctx, &[all], objective)
}

/// `folds`-fold cross-validation over contiguous day-blocks of the tune
/// queries. Trained aggregators are refitted without the held-out block.
pub fn run_cv(spec: &GridSpec, ctx: &EvalContext<'_>, folds: usize, objective: Objective) -> Result<Leaderboard> {
    if folds == 1 {
        return run_grid(spec, ctx, objective);
    }
    let blocks = fold_blocks(ctx, folds)?;
    run_cv_blocks(spec, ctx, &blocks, objective)
}

/// Tunes one cell per target hour by cross-validation and returns the bank
/// together with each hour's leaderboard.
pub fn tune_hourly(
    spec: &GridSpec,
    ctx: &EvalContext<'_>,
    folds: usize,
    objective: Objective,
) -> Result<(HourlyModelBank, Vec<Leaderboard>)> {
    let blocks = if folds == 1 {
        vec![ctx.tune_targets().collect()]
    } else {
        fold_blocks(ctx, folds)?
    };
    let results = evaluate_cells(ctx, spec, &blocks, objective)?;
    let tune_hours: Vec<Vec<usize>> = blocks.iter().map(|b| hours_of(ctx, b)).collect();
    let test: Vec<usize> = ctx.targets(Side::Test).collect();
    let test_hours = hours_of(ctx, &test);
    let boards: Vec<Leaderboard> = (0..HourlyModelBank::HOURS)
        .map(|h| leaderboard_from(objective, &results, |x| x == h, &tune_hours, &test_hours))
        .collect();
    let entries = boards
        .iter()
        .enumerate()
        .map(|(h, b)| {
            b.selection()
                .map(|r| r.params.clone())
                .ok_or_else(|| Error::invalid(format!("no grid cell succeeded for hour {h}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((HourlyModelBank::new(entries)?, boards))
}
