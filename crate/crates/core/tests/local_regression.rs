//! Local regression against an independent hat-matrix computation.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use trajacast::neighbors::{Candidate, CandidateSet, Trajectories};
use trajacast::pointcast::forecast_local_regression;

/// Row of the hat matrix mapping candidate targets to the prediction at
/// the query: `x_q^T (X^T X)^{-1} X^T`.
fn hat_row(traj: &Trajectories<'_>, query: usize, sources: &[usize]) -> DVector<f64> {
    let l = traj.window_len();
    let x = DMatrix::from_fn(sources.len(), l + 1, |r, c| if c < l { traj.window_of(sources[r])[c] } else { 1.0 });
    let xq = DVector::from_fn(l + 1, |c, _| if c < l { traj.window_of(query)[c] } else { 1.0 });
    let gram = (x.transpose() * &x).try_inverse().expect("well-conditioned design");
    (xq.transpose() * gram * x.transpose()).transpose()
}

fn candidates(sources: &[usize], values: &[f64]) -> CandidateSet {
    CandidateSet {
        entries: sources
            .iter()
            .zip(values)
            .enumerate()
            .map(|(i, (&source, &value))| Candidate { value, distance: i as f64, source })
            .collect(),
        k: sources.len(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Perturbing candidate `s` by ε moves the forecast by ε·H_qs.
    #[test]
    fn finite_differences_follow_hat_row(
        series in prop::collection::vec(0.0f64..500.0, 120),
        targets in prop::collection::vec(0.0f64..500.0, 24),
        l in 2usize..5,
    ) {
        let traj = Trajectories::new(&series, 0, l, 1);
        let sources: Vec<usize> = (1..=24).map(|i| i * 4).collect();
        let query = 110 - l;
        let hat = hat_row(&traj, query, &sources);
        let base = forecast_local_regression(&traj, query, &candidates(&sources, &targets)).unwrap();
        prop_assert!(!base.regularized);
        let analytic: f64 = hat.iter().zip(&targets).map(|(h, y)| h * y).sum();
        prop_assert!((base.value - analytic).abs() <= 1e-6 * analytic.abs().max(1.0));
        let eps = 1e-3;
        for s in 0..sources.len() {
            let mut bumped = targets.clone();
            bumped[s] += eps;
            let moved = forecast_local_regression(&traj, query, &candidates(&sources, &bumped)).unwrap();
            let slope = (moved.value - base.value) / eps;
            prop_assert!((slope - hat[s]).abs() <= 1e-6, "s={}: slope {} vs hat {}", s, slope, hat[s]);
        }
    }
}
