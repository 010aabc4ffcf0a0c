//! Per-hour model bank dispatch.

use trajacast::dataset::{HistoryRule, Side, SplitPlan};
use trajacast::pointcast::{forecast_hourly, HourlyForecaster, HourlyModelBank, HyperParams, SimilarityForecaster};
use trajacast::synthdata::{generate, SynthKind, SynthSpec};
use trajacast::{EvalContext, Forecaster, TimeSeries};

const DAYS: usize = 20;

fn sinusoid() -> TimeSeries {
    let kind = SynthKind::DailySinusoid { level: 400.0, amplitude: 300.0, noise_sd: 20.0 };
    generate(&SynthSpec::new(kind, 96 * DAYS, 5)).unwrap()
}

fn two_regime() -> TimeSeries {
    let kind = SynthKind::TwoRegime { weekday: (400.0, 300.0), weekend: (150.0, 60.0), noise_sd: 15.0 };
    generate(&SynthSpec::new(kind, 96 * DAYS, 9)).unwrap()
}

/// Last ten days split into five tune and five test days.
fn plan(ts: &TimeSeries) -> SplitPlan {
    let total = ts.len();
    SplitPlan::new(total, total - 96 * 10 + 1, total - 96 * 5 + 1, HistoryRule::EqualHistory).unwrap()
}

fn sample_targets(ctx: &EvalContext<'_>) -> Vec<usize> {
    ctx.targets(Side::Tune).chain(ctx.targets(Side::Test)).step_by(7).collect()
}

/// A bank repeating one entry forecasts exactly like the single model.
#[test]
fn uniform_bank_matches_single_model() {
    let ts = sinusoid();
    let plan = plan(&ts);
    let ctx = EvalContext::new(&ts, &plan).unwrap();
    let plain = HyperParams::default();
    let seasonal = HyperParams { aggregator: "m2:g1".into(), ..HyperParams::seasonal() };
    for params in [plain, seasonal] {
        let bank = HourlyModelBank::uniform(params.clone()).unwrap();
        let single = SimilarityForecaster::new(params.clone()).unwrap();
        let mut hourly = HourlyForecaster::new(&bank).unwrap();
        hourly.fit(&ctx).unwrap();
        for t in sample_targets(&ctx) {
            let expected = single.forecast(&ctx, t).unwrap().value;
            let via_fn = forecast_hourly(&ctx, &bank, t).unwrap();
            let via_model = hourly.forecast(&ctx, t).unwrap().value;
            assert_eq!(via_fn.to_bits(), expected.to_bits(), "{params}: t={t}");
            assert_eq!(via_model.to_bits(), expected.to_bits(), "{params}: t={t}");
        }
    }
}

/// The series sits on a 15-minute grid, so a 03:10 query falls in the
/// 03:00 slot; every slot of hour 3 must use the hour-3 entry.
#[test]
fn hour_three_queries_use_hour_three_entry() {
    let ts = sinusoid();
    let plan = plan(&ts);
    let ctx = EvalContext::new(&ts, &plan).unwrap();
    let other = HyperParams { k: 40, ..HyperParams::default() };
    let special = HyperParams { k: 1, window: 6, ..HyperParams::default() };
    let mut entries = vec![other.clone(); 24];
    entries[3] = special.clone();
    let bank = HourlyModelBank::new(entries).unwrap();
    let special_model = SimilarityForecaster::new(special).unwrap();
    let other_model = SimilarityForecaster::new(other).unwrap();

    let mut checked = 0;
    for t in ctx.targets(Side::Test) {
        let stamp = ts.timestamp(t - 1);
        let got = forecast_hourly(&ctx, &bank, t).unwrap();
        if ts.hour_of_day(t - 1) == 3 {
            assert_eq!(got, special_model.forecast(&ctx, t).unwrap().value, "at {stamp}");
            checked += 1;
        } else {
            assert_eq!(got, other_model.forecast(&ctx, t).unwrap().value, "at {stamp}");
        }
    }
    assert_eq!(checked, 5 * 4, "five test days with four hour-3 slots each");
}

/// On weekday/weekend data the seasonal radius changes the forecasts.
#[test]
fn radius_three_and_zero_differ_on_two_regime_data() {
    let ts = two_regime();
    let plan = plan(&ts);
    let ctx = EvalContext::new(&ts, &plan).unwrap();
    let wide = HourlyModelBank::uniform(HyperParams { radius: Some(3), ..HyperParams::seasonal() }).unwrap();
    let narrow = HourlyModelBank::uniform(HyperParams { radius: Some(0), ..HyperParams::seasonal() }).unwrap();
    let targets: Vec<usize> = ctx.targets(Side::Test).collect();
    let differing = targets
        .iter()
        .filter(|&&t| forecast_hourly(&ctx, &wide, t).unwrap() != forecast_hourly(&ctx, &narrow, t).unwrap())
        .count();
    assert!(differing > targets.len() / 2, "only {differing} of {} forecasts differ", targets.len());
}

/// Bank CSV round trip.
#[test]
fn bank_csv_round_trip() {
    let mut entries: Vec<HyperParams> = (0..24)
        .map(|h| HyperParams { k: 5 + h, window: 2 + h % 10, ..HyperParams::default() })
        .collect();
    entries[7] = HyperParams { aggregator: "m1:f3".into(), outlier: "tailp:0.05:0.05".into(), ..HyperParams::seasonal() };
    let bank = HourlyModelBank::new(entries).unwrap();
    let mut buf = Vec::new();
    bank.write_csv(&mut buf).unwrap();
    let back = HourlyModelBank::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, bank);
    let text = String::from_utf8(buf).unwrap();
    let short: String = text.lines().take(10).collect::<Vec<_>>().join("\n");
    assert!(HourlyModelBank::read_csv(short.as_bytes()).is_err());
}
