//! Point and interval accuracy measures and the Diebold–Mariano test.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::intervals::PredictionInterval;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEvaluation {
    pub mae: f64,
    /// Percent; `None` when some actual is zero.
    pub mape: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalEvaluation {
    pub uc: f64,
    pub winkler: f64,
    pub n: usize,
}

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { expected: a, found: b });
    }
    if a == 0 {
        return Err(Error::insufficient("no observations to evaluate"));
    }
    Ok(())
}

pub fn point_metrics(forecasts: &[f64], actuals: &[f64]) -> Result<PointEvaluation> {
    same_len(forecasts.len(), actuals.len())?;
    let n = forecasts.len() as f64;
    let mae = forecasts.iter().zip(actuals).map(|(f, y)| (f - y).abs()).sum::<f64>() / n;
    let mape = if actuals.iter().any(|&y| y == 0.0) {
        None
    } else {
        Some(100.0 * forecasts.iter().zip(actuals).map(|(f, y)| ((f - y) / y).abs()).sum::<f64>() / n)
    };
    Ok(PointEvaluation { mae, mape, n: forecasts.len() })
}

/// Winkler score of one interval at its own level α.
pub fn winkler_score(pi: &PredictionInterval, y: f64) -> f64 {
    let width = pi.width();
    if y < pi.lower {
        width + 2.0 / pi.alpha * (pi.lower - y)
    } else if y > pi.upper {
        width + 2.0 / pi.alpha * (y - pi.upper)
    } else {
        width
    }
}

pub fn interval_metrics(intervals: &[PredictionInterval], actuals: &[f64], alpha: f64) -> Result<IntervalEvaluation> {
    same_len(intervals.len(), actuals.len())?;
    crate::intervals::check_alpha(alpha)?;
    let n = intervals.len() as f64;
    let mut covered = 0usize;
    let mut total = 0.0;
    for (pi, &y) in intervals.iter().zip(actuals) {
        let pi = PredictionInterval { alpha, ..*pi };
        covered += usize::from(pi.covers(y));
        total += winkler_score(&pi, y);
    }
    Ok(IntervalEvaluation {
        uc: covered as f64 / n,
        winkler: total / n,
        n: intervals.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Absolute,
    Squared,
}

impl Loss {
    pub fn apply(self, e: f64) -> f64 {
        match self {
            Loss::Absolute => e.abs(),
            Loss::Squared => e * e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmResult {
    pub statistic: f64,
    pub p_value: f64,
    /// The loss differential has no variance.
    pub degenerate: bool,
}

pub const DM_MIN_OBSERVATIONS: usize = 30;

/// Diebold–Mariano test on forecast errors of models A and B.
pub fn dm_test(errors_a: &[f64], errors_b: &[f64], loss: Loss, horizon: usize) -> Result<DmResult> {
    same_len(errors_a.len(), errors_b.len())?;
    let la: Vec<f64> = errors_a.iter().map(|&e| loss.apply(e)).collect();
    let lb: Vec<f64> = errors_b.iter().map(|&e| loss.apply(e)).collect();
    dm_test_losses(&la, &lb, horizon)
}

/// Diebold–Mariano test on per-period losses (e.g. Winkler scores).
///
/// `d_t = loss_a − loss_b`; long-run variance from autocovariances up to
/// lag `h − 1` (rectangular kernel); Harvey–Leybourne–Newbold correction;
/// two-sided normal p-value. A negative statistic favours A.
pub fn dm_test_losses(loss_a: &[f64], loss_b: &[f64], horizon: usize) -> Result<DmResult> {
    same_len(loss_a.len(), loss_b.len())?;
    if horizon == 0 {
        return Err(Error::invalid("DM horizon must be at least 1"));
    }
    let n = loss_a.len();
    if n < DM_MIN_OBSERVATIONS {
        return Err(Error::insufficient(format!(
            "DM test needs at least {DM_MIN_OBSERVATIONS} pairs, got {n}"
        )));
    }
    let d: Vec<f64> = loss_a.iter().zip(loss_b).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let autocov = |k: usize| -> f64 {
        d[k..].iter().zip(&d).map(|(x, y)| (x - mean) * (y - mean)).sum::<f64>() / nf
    };
    let gamma0 = autocov(0);
    let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if gamma0 <= (1e-12 * scale).powi(2) {
        return Ok(DmResult {
            statistic: if mean == 0.0 { 0.0 } else { mean.signum() * f64::INFINITY },
            p_value: if mean == 0.0 { 1.0 } else { 0.0 },
            degenerate: true,
        });
    }
    let h = horizon.min(n - 1);
    let mut lrv = gamma0 + 2.0 * (1..h).map(autocov).sum::<f64>();
    if lrv <= 0.0 {
        lrv = gamma0;
    }
    let hf = h as f64;
    let hln = ((nf + 1.0 - 2.0 * hf + hf * (hf - 1.0) / nf) / nf).sqrt();
    let statistic = hln * mean / (lrv / nf).sqrt();
    let normal = Normal::standard();
    let p_value = (2.0 * normal.sf(statistic.abs())).clamp(0.0, 1.0);
    Ok(DmResult { statistic, p_value, degenerate: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pi(lower: f64, upper: f64, alpha: f64) -> PredictionInterval {
        PredictionInterval::new(lower, upper, alpha).unwrap()
    }

    #[test]
    fn point_examples() {
        let m = point_metrics(&[110.0, 90.0], &[100.0, 100.0]).unwrap();
        assert_eq!((m.mae, m.mape), (10.0, Some(10.0)));
        let same = point_metrics(&[3.0, 4.0], &[3.0, 4.0]).unwrap();
        assert_eq!((same.mae, same.mape), (0.0, Some(0.0)));
        let zero = point_metrics(&[1.0, 4.0], &[0.0, 4.0]).unwrap();
        assert_eq!((zero.mae, zero.mape), (0.5, None));
        assert!(point_metrics(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn winkler_examples() {
        let p = pi(100.0, 200.0, 0.05);
        assert_eq!(winkler_score(&p, 150.0), 100.0);
        assert_eq!(winkler_score(&p, 210.0), 500.0);
        assert_eq!(winkler_score(&p, 90.0), 500.0);
        assert_eq!(winkler_score(&p, 200.0), 100.0);
        let all = vec![p; 4];
        let m = interval_metrics(&all, &[150.0, 120.0, 200.0, 250.0], 0.05).unwrap();
        assert_eq!(m.uc, 0.75);
    }

    #[test]
    fn dm_degenerate_cases() {
        let a: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let r = dm_test(&a, &a, Loss::Absolute, 1).unwrap();
        assert!(r.degenerate && r.p_value == 1.0);
        let la: Vec<f64> = (0..50).map(|i| 2.0 + (i % 3) as f64).collect();
        let lb: Vec<f64> = la.iter().map(|x| x + 1.0).collect();
        let r = dm_test_losses(&lb, &la, 1).unwrap();
        assert!(r.degenerate && r.p_value == 0.0);
        assert!(dm_test(&a[..10], &a[..10], Loss::Absolute, 1).is_err());
    }

    #[test]
    fn dm_statistic_matches_hand_computation() {
        // d alternates 1, 3: mean 2, γ0 = 1, h = 1 → DM = 2 / sqrt(1/n) · HLN
        let la: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { 3.0 }).collect();
        let lb = vec![0.0; 40];
        let r = dm_test_losses(&la, &lb, 1).unwrap();
        let n = 40.0f64;
        let expected = ((n - 1.0) / n).sqrt() * 2.0 / (1.0 / n).sqrt();
        assert_abs_diff_eq!(r.statistic, expected, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn winkler_minimized_inside(lo in -100.0f64..100.0, w in 0.0f64..50.0, y in -300.0f64..300.0, alpha in 0.01f64..0.99) {
            let p = pi(lo, lo + w, alpha);
            let s = winkler_score(&p, y);
            if p.covers(y) {
                prop_assert_eq!(s, p.width());
            } else {
                prop_assert!(s > p.width());
            }
        }

        #[test]
        fn widening_to_cover_reduces_mean(lo in 0.0f64..100.0, w in 0.0f64..50.0, miss in 0.1f64..100.0, alpha in 0.01f64..0.5) {
            let y = lo + w + miss;
            let others = [pi(0.0, 10.0, alpha), pi(5.0, 8.0, alpha)];
            let actuals = [5.0, 20.0, y];
            let before = interval_metrics(&[others[0], others[1], pi(lo, lo + w, alpha)], &actuals, alpha).unwrap();
            let after = interval_metrics(&[others[0], others[1], pi(lo, y, alpha)], &actuals, alpha).unwrap();
            prop_assert!(after.winkler < before.winkler);
        }

        #[test]
        fn dm_is_antisymmetric(a in prop::collection::vec(-50.0f64..50.0, 30..120), shift in -5.0f64..5.0, h in 1usize..5) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x * 0.8 + shift + (i % 5) as f64).collect();
            let ab = dm_test(&a, &b, Loss::Squared, h).unwrap();
            let ba = dm_test(&b, &a, Loss::Squared, h).unwrap();
            prop_assert!((ab.statistic + ba.statistic).abs() <= 1e-12 * ab.statistic.abs().max(1.0));
            prop_assert!((ab.p_value - ba.p_value).abs() <= 1e-12);
        }

        #[test]
        fn mae_translation_equivariant(pairs in prop::collection::vec((0.0f64..1e3, 0.0f64..1e3), 1..50), c in -1e3f64..1e3) {
            let (f, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let fs: Vec<f64> = f.iter().map(|v| v + c).collect();
            let ys: Vec<f64> = y.iter().map(|v| v + c).collect();
            let a = point_metrics(&f, &y).unwrap().mae;
            let b = point_metrics(&fs, &ys).unwrap().mae;
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }
}
