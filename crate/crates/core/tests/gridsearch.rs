//! Grid search and cross-validation behaviour.

use trajacast::dataset::{HistoryRule, Side, SplitPlan};
use trajacast::evaluation::evaluate;
use trajacast::gridsearch::{fold_blocks, run_cv, run_cv_blocks, run_grid, GridSpec, Leaderboard, Objective};
use trajacast::pointcast::{HyperParams, SimilarityForecaster};
use trajacast::synthdata::{generate, SynthKind, SynthSpec};
use trajacast::{EvalContext, TimeSeries};

fn sinusoid(days: usize, seed: u64) -> TimeSeries {
    let kind = SynthKind::DailySinusoid { level: 400.0, amplitude: 300.0, noise_sd: 20.0 };
    generate(&SynthSpec::new(kind, 96 * days, seed)).unwrap()
}

/// Last `2 * half` days: `half` tune days then `half` test days.
fn plan(ts: &TimeSeries, half: usize) -> SplitPlan {
    let total = ts.len();
    SplitPlan::new(total, total - 96 * 2 * half + 1, total - 96 * half + 1, HistoryRule::EqualHistory).unwrap()
}

fn grid(windows: &[usize], ks: &[usize], models: &[&str]) -> GridSpec {
    GridSpec {
        windows: windows.to_vec(),
        ks: ks.to_vec(),
        radii: vec![None],
        models: models.iter().map(|s| s.to_string()).collect(),
        weights: vec!["f2".into(), "g1".into()],
        ..GridSpec::default()
    }
}

fn csv_bytes(board: &Leaderboard) -> Vec<u8> {
    let mut buf = Vec::new();
    board.write_csv(&mut buf).unwrap();
    buf
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

// ---------------------------------------------------------------------------

/// A one-cell grid reports exactly what a plain evaluation of that model does.
#[test]
fn single_cell_grid_matches_single_evaluation() {
    let ts = sinusoid(24, 1);
    let plan = plan(&ts, 6);
    let ctx = EvalContext::new(&ts, &plan).unwrap();
    for params in [
        HyperParams::seasonal(),
        HyperParams { aggregator: "m3".into(), k: 10, ..HyperParams::default() },
    ] {
        let spec = GridSpec {
            windows: vec![params.window],
            ks: vec![params.k],
            radii: vec![params.radius],
            models: vec![params.aggregator.clone()],
            ..GridSpec::default()
        };
        let board = run_grid(&spec, &ctx, Objective::Mae).unwrap();
        assert_eq!(board.rows.len(), 1);
        let row = &board.rows[0];
        let mut model = SimilarityForecaster::new(params.clone()).unwrap();
        let report = evaluate(&ctx, &mut model, None, 0.05);
        let tune = report.summarize(Side::Tune).point.unwrap().mae;
        let test = report.summarize(Side::Test).point.unwrap().mae;
        assert!(close(row.tune_metric.unwrap(), tune), "{params}: grid {:?} vs {tune}", row.tune_metric);
        assert!(close(row.test_metric.unwrap(), test), "{params}: grid {:?} vs {test}", row.test_metric);
    }
}

/// The strictly better cell on tune is selected and rows are sorted.
#[test]
fn dominant_cell_is_selected() {
    let ts = sinusoid(20, 2);
    let plan = plan(&ts, 5);
    let ctx = EvalContext::new(&ts, &plan).unwrap();
    let board = run_grid(&grid(&[8], &[1, 40], &["mean"]), &ctx, Objective::Mae).unwrap();
    let best = board.selection().unwrap();
    assert_eq!(best.params.k, 40);
    assert!(best.tune_metric.unwrap() < board.rows[1].tune_metric.unwrap());
    let metrics: Vec<f64> = board.rows.iter().map(|r| r.tune_metric.unwrap()).collect();
    assert!(metrics.windows(2).all(|w| w[0] <= w[1]));
}

/// The leaderboard CSV does not depend on the worker count.
#[test]
fn leaderboard_is_identical_across_thread_counts() {
    let ts = sinusoid(16, 3);
    let plan = plan(&ts, 4);
    let ctx = EvalContext::new(&ts, &plan).unwrap();
    let spec = grid(&[4, 9], &[5, 15, 30], &["mean", "m1", "m2", "m3", "localreg"]);
    let mut outputs = Vec::new();
    for threads in [1, 3, 8] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        for objective in [Objective::Mae, Objective::Winkler { alpha: 0.1 }] {
            let board = pool.install(|| run_cv(&spec, &ctx, 2, objective)).unwrap();
            outputs.push((threads, objective, csv_bytes(&board)));
        }
    }
    for (threads, objective, bytes) in &outputs[2..] {
        let reference = &outputs[if *objective == Objective::Mae { 0 } else { 1 }].2;
        assert_eq!(bytes, reference, "{threads} threads, {objective}");
    }
}

/// Corrupting test actuals changes neither tune metrics nor the selection.
#[test]
fn selection_ignores_test_actuals() {
    let ts = sinusoid(20, 4);
    let plan = plan(&ts, 5);
    let mut corrupted = ts.values().to_vec();
    for (i, v) in corrupted.iter_mut().enumerate().skip(plan.test_first - 1) {
        *v = ((i * 7907) % 1000) as f64;
    }
    let bad = ts.with_values(corrupted).unwrap();
    let spec = grid(&[5, 12], &[5, 25], &["mean", "m2", "m3"]);
    let clean = run_grid(&spec, &EvalContext::new(&ts, &plan).unwrap(), Objective::Mae).unwrap();
    let dirty = run_grid(&spec, &EvalContext::new(&bad, &plan).unwrap(), Objective::Mae).unwrap();
    assert_eq!(clean.selection().unwrap().params, dirty.selection().unwrap().params);
    for (a, b) in clean.rows.iter().zip(&dirty.rows) {
        assert_eq!(a.params, b.params);
        assert_eq!(a.tune_metric, b.tune_metric, "{}", a.params);
    }
    assert_ne!(clean.rows[0].test_metric, dirty.rows[0].test_metric);
}

/// One fold is the plain grid; two identical blocks give the plain metric.
#[test]
fn cv_degenerate_cases() {
    let ts = sinusoid(16, 5);
    let plan = plan(&ts, 4);
    let ctx = EvalContext::new(&ts, &plan).unwrap();
    let spec = grid(&[6, 10], &[10, 20], &["mean", "m1"]);
    let plain = run_grid(&spec, &ctx, Objective::Mae).unwrap();
    assert_eq!(run_cv(&spec, &ctx, 1, Objective::Mae).unwrap(), plain);
    let all: Vec<usize> = ctx.tune_targets().collect();
    let doubled = run_cv_blocks(&spec, &ctx, &[all.clone(), all], Objective::Mae).unwrap();
    for (a, b) in plain.rows.iter().zip(&doubled.rows) {
        assert_eq!(a.params, b.params);
        assert_eq!(a.tune_metric, b.tune_metric);
    }
}

/// Reordering the folds leaves selection and metrics unchanged.
#[test]
fn fold_order_does_not_matter() {
    let ts = sinusoid(20, 6);
    let plan = plan(&ts, 5);
    let ctx = EvalContext::new(&ts, &plan).unwrap();
    let blocks = fold_blocks(&ctx, 5).unwrap();
    assert_eq!(blocks.len(), 5);
    assert!(blocks.iter().all(|b| b.len() == 96), "five tune days in five one-day folds");
    let mut reversed = blocks.clone();
    reversed.reverse();
    let spec = grid(&[6, 10], &[10, 20], &["mean", "m3"]);
    let a = run_cv_blocks(&spec, &ctx, &blocks, Objective::Mae).unwrap();
    let b = run_cv_blocks(&spec, &ctx, &reversed, Objective::Mae).unwrap();
    assert_eq!(a.selection().unwrap().params, b.selection().unwrap().params);
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert_eq!(x.params, y.params);
        assert!(close(x.tune_metric.unwrap(), y.tune_metric.unwrap()));
    }
    assert!(fold_blocks(&ctx, 6).is_err(), "five tune days cannot make six folds");
}

/// A cell whose seasonal filter leaves early queries without neighbours is
/// recorded as failed and ranked last; the sweep still completes.
#[test]
fn failed_cells_rank_last() {
    let ts = sinusoid(3, 7);
    let plan = SplitPlan::new(ts.len(), 31, 160, HistoryRule::FromStart).unwrap();
    let ctx = EvalContext::new(&ts, &plan).unwrap();
    let spec = GridSpec { radii: vec![Some(0), None], ..grid(&[4], &[5], &["mean"]) };
    let board = run_grid(&spec, &ctx, Objective::Mae).unwrap();
    let last = board.rows.last().unwrap();
    assert_eq!(last.params.radius, Some(0));
    assert!(last.tune_metric.is_none() && last.status.starts_with("error"), "{}", last.status);
    assert_eq!(board.selection().unwrap().params.radius, None);
}

/// The CSV has the documented columns.
#[test]
fn leaderboard_csv_layout() {
    let ts = sinusoid(12, 8);
    let plan = plan(&ts, 3);
    let ctx = EvalContext::new(&ts, &plan).unwrap();
    let board = run_grid(&grid(&[6], &[5], &["m2"]), &ctx, Objective::Mae).unwrap();
    let text = String::from_utf8(csv_bytes(&board)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "rank,model,distance,L,K,R,outlier,weight_fn,tune_metric,test_metric,status");
    assert!(lines.next().unwrap().starts_with("1,m2,weuclidean,6,5,,none,g1,"));
}
