//! Trajectory distance functions.
//!
//! Every distance is a [`Distance`] trait object created from its config
//! name through [`registry`]: `euclidean`, `weuclidean`, `manhattan`,
//! `lp:<p>`, `sup`, `headtail:<l1>:<l2>[:abs|sq]`, `cosine`, `pearson`,
//! `canberra`, `lcs:<eps>:<delta>`.
//!
//! Coordinate 1 of a trajectory is its oldest observation.

use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::registry::{expect_args, parse_arg, Registry};

pub trait Distance: Send + Sync + fmt::Debug {
    /// Canonical config spelling, e.g. `lp:3`.
    fn spec(&self) -> String;

    fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64>;

    /// Checks window-dependent parameter constraints.
    fn check_window(&self, _len: usize) -> Result<()> {
        Ok(())
    }
}

fn same_len(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Euclidean;

impl Distance for Euclidean {
    fn spec(&self) -> String {
        "euclidean".into()
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        same_len(x, y)?;
        Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Manhattan;

impl Distance for Manhattan {
    fn spec(&self) -> String {
        "manhattan".into()
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        same_len(x, y)?;
        Ok(x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lp {
    p: f64,
}

impl Lp {
    pub fn new(p: f64) -> Result<Self> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::invalid(format!("lp needs finite p ≥ 1, got {p}")));
        }
        Ok(Self { p })
    }
}

impl Distance for Lp {
    fn spec(&self) -> String {
        format!("lp:{}", self.p)
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        same_len(x, y)?;
        let s: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs().powf(self.p)).sum();
        Ok(s.powf(1.0 / self.p))
    }
}

/// Recency-weighted Euclidean distance with `w_i = i / (L(L+1)/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightedEuclidean;

impl WeightedEuclidean {
    pub fn weights(len: usize) -> impl Iterator<Item = f64> {
        let total = (len * (len + 1)) as f64 / 2.0;
        (1..=len).map(move |i| i as f64 / total)
    }
}

impl Distance for WeightedEuclidean {
    fn spec(&self) -> String {
        "weuclidean".into()
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        same_len(x, y)?;
        let s: f64 = x
            .iter()
            .zip(y)
            .zip(Self::weights(x.len()))
            .map(|((a, b), w)| w * (a - b) * (a - b))
            .sum();
        Ok(s.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sup;

impl Distance for Sup {
    fn spec(&self) -> String {
        "sup".into()
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        same_len(x, y)?;
        Ok(x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

/// Per-coordinate distance summed by [`HeadTail`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coordinate {
    #[default]
    Absolute,
    Squared,
}

impl Coordinate {
    fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            Coordinate::Absolute => (a - b).abs(),
            Coordinate::Squared => (a - b) * (a - b),
        }
    }
}

/// Sum of coordinate distances over the first `head` and last `tail`
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeadTail {
    head: usize,
    tail: usize,
    coordinate: Coordinate,
}

impl HeadTail {
    pub fn new(head: usize, tail: usize, coordinate: Coordinate) -> Result<Self> {
        if head == 0 || tail == 0 {
            return Err(Error::invalid("headtail needs l1, l2 ≥ 1"));
        }
        Ok(Self {
            head,
            tail,
            coordinate,
        })
    }
}

impl Distance for HeadTail {
    fn spec(&self) -> String {
        match self.coordinate {
            Coordinate::Absolute => format!("headtail:{}:{}", self.head, self.tail),
            Coordinate::Squared => format!("headtail:{}:{}:sq", self.head, self.tail),
        }
    }

    fn check_window(&self, len: usize) -> Result<()> {
        if self.head + self.tail + 1 > len {
            return Err(Error::invalid(format!(
                "headtail needs l1 + l2 ≤ L − 1 (l1={}, l2={}, L={len})",
                self.head, self.tail
            )));
        }
        Ok(())
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        same_len(x, y)?;
        self.check_window(x.len())?;
        let n = x.len();
        let head: f64 = (0..self.head).map(|i| self.coordinate.eval(x[i], y[i])).sum();
        let tail: f64 = (n - self.tail..n).map(|i| self.coordinate.eval(x[i], y[i])).sum();
        Ok(head + tail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cosine;

impl Distance for Cosine {
    fn spec(&self) -> String {
        "cosine".into()
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        same_len(x, y)?;
        let sx: f64 = x.iter().map(|a| a * a).sum();
        let sy: f64 = y.iter().map(|a| a * a).sum();
        if sx == 0.0 || sy == 0.0 {
            return Err(Error::Degenerate("cosine distance of a zero-norm vector".into()));
        }
        let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        // sqrt(a * a) == a exactly, so d(x, x) is exactly zero
        Ok((1.0 - dot / (sx * sy).sqrt()).clamp(0.0, 2.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pearson;

impl Distance for Pearson {
    fn spec(&self) -> String {
        "pearson".into()
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        same_len(x, y)?;
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (a, b) in x.iter().zip(y) {
            let (da, db) = (a - mx, b - my);
            sxy += da * db;
            sxx += da * da;
            syy += db * db;
        }
        if sxx == 0.0 || syy == 0.0 {
            return Err(Error::Degenerate("pearson distance of a zero-variance vector".into()));
        }
        Ok((1.0 - sxy / (sxx * syy).sqrt()).clamp(0.0, 2.0))
    }
}

/// Canberra distance; coordinates with `|x_i| + |y_i| = 0` contribute 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Canberra;

impl Distance for Canberra {
    fn spec(&self) -> String {
        "canberra".into()
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        same_len(x, y)?;
        Ok(x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let den = a.abs() + b.abs();
                if den == 0.0 {
                    0.0
                } else {
                    (a - b).abs() / den
                }
            })
            .sum())
    }
}

/// Longest-common-subsequence dissimilarity `L − LC(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lcs {
    eps: f64,
    delta: usize,
}

impl Lcs {
    pub fn new(eps: f64, delta: usize) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("lcs needs ε > 0, got {eps}")));
        }
        Ok(Self { eps, delta })
    }
}

impl Distance for Lcs {
    fn spec(&self) -> String {
        format!("lcs:{}:{}", self.eps, self.delta)
    }

    fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        same_len(x, y)?;
        let lc = lcs_length(x, y, self.eps, self.delta)?;
        Ok((x.len() - lc) as f64)
    }
}

/// Length of the longest common subsequence where `x_k` matches `y_m` when
/// `|x_k − y_m| < eps` and `|k − m| ≤ delta`. Bottom-up table, O(|x|·|y|).
pub fn lcs_length(x: &[f64], y: &[f64], eps: f64, delta: usize) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("lcs needs ε > 0, got {eps}")));
    }
    let m = y.len();
    let mut prev = vec![0usize; m + 1];
    let mut cur = vec![0usize; m + 1];
    for (k, xk) in x.iter().enumerate() {
        for (j, yj) in y.iter().enumerate() {
            cur[j + 1] = if (xk - yj).abs() < eps && k.abs_diff(j) <= delta {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m])
}

fn no_args(name: &'static str, args: &[&str]) -> Result<()> {
    expect_args(name, args, 0)
}

/// Built-in distances keyed by config name.
pub fn registry() -> Registry<dyn Distance> {
    let mut reg: Registry<dyn Distance> = Registry::new("distance");
    reg.register("euclidean", |a, _| {
        no_args("euclidean", a)?;
        Ok(Box::new(Euclidean))
    })
    .register("weuclidean", |a, _| {
        no_args("weuclidean", a)?;
        Ok(Box::new(WeightedEuclidean))
    })
    .register("manhattan", |a, _| {
        no_args("manhattan", a)?;
        Ok(Box::new(Manhattan))
    })
    .register("lp", |a, _| {
        expect_args("lp", a, 1)?;
        Ok(Box::new(Lp::new(parse_arg("lp", "p", a[0])?)?))
    })
    .register("sup", |a, _| {
        no_args("sup", a)?;
        Ok(Box::new(Sup))
    })
    .register("headtail", |a, _| {
        if !(2..=3).contains(&a.len()) {
            return Err(Error::invalid("headtail expects <l1>:<l2>[:abs|sq]"));
        }
        let coordinate = match a.get(2).copied() {
            None | Some("abs") => Coordinate::Absolute,
            Some("sq") => Coordinate::Squared,
            Some(other) => {
                return Err(Error::invalid(format!("headtail: unknown coordinate distance `{other}`")))
            }
        };
        Ok(Box::new(HeadTail::new(
            parse_arg("headtail", "l1", a[0])?,
            parse_arg("headtail", "l2", a[1])?,
            coordinate,
        )?))
    })
    .register("cosine", |a, _| {
        no_args("cosine", a)?;
        Ok(Box::new(Cosine))
    })
    .register("pearson", |a, _| {
        no_args("pearson", a)?;
        Ok(Box::new(Pearson))
    })
    .register("canberra", |a, _| {
        no_args("canberra", a)?;
        Ok(Box::new(Canberra))
    })
    .register("lcs", |a, _| {
        expect_args("lcs", a, 2)?;
        Ok(Box::new(Lcs::new(
            parse_arg("lcs", "eps", a[0])?,
            parse_arg("lcs", "delta", a[1])?,
        )?))
    });
    reg
}

/// Builds a distance from its config name using the built-in registry.
pub fn parse(spec: &str) -> Result<Box<dyn Distance>> {
    static BUILTIN: OnceLock<Registry<dyn Distance>> = OnceLock::new();
    BUILTIN.get_or_init(registry).create(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn d(spec: &str, x: &[f64], y: &[f64]) -> f64 {
        parse(spec).unwrap().distance(x, y).unwrap()
    }

    #[test]
    fn basic_values() {
        let (x, y) = ([0.0, 3.0], [4.0, 0.0]);
        assert_abs_diff_eq!(d("euclidean", &x, &y), 5.0);
        assert_abs_diff_eq!(d("lp:2", &x, &y), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d("manhattan", &x, &y), 7.0);
        assert_abs_diff_eq!(d("lp:1", &x, &y), 7.0);
        assert_abs_diff_eq!(d("sup", &x, &y), 4.0);
    }

    #[test]
    fn weighted_euclidean_two_points() {
        assert_abs_diff_eq!(d("weuclidean", &[0.0, 0.0], &[3.0, 3.0]), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn weighted_euclidean_favours_recent_coordinates() {
        let old_diff = d("weuclidean", &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]);
        let new_diff = d("weuclidean", &[0.0, 0.0, 0.0], &[0.0, 0.0, 1.0]);
        assert!(new_diff > old_diff);
    }

    #[test]
    fn weights_sum_to_one() {
        for len in 1..=60 {
            assert_abs_diff_eq!(WeightedEuclidean::weights(len).sum::<f64>(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn canberra_value_and_zero_convention() {
        assert_abs_diff_eq!(d("canberra", &[1.0, 2.0], &[3.0, 2.0]), 0.5);
        assert_abs_diff_eq!(d("canberra", &[0.0, 1.0], &[0.0, 3.0]), 0.5);
    }

    #[test]
    fn cosine_and_pearson() {
        assert_abs_diff_eq!(d("cosine", &[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_abs_diff_eq!(d("pearson", &[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), 2.0);
    }

    #[test]
    fn degenerate_inputs_are_errors() {
        let cos = parse("cosine").unwrap();
        assert!(matches!(cos.distance(&[0.0, 0.0], &[1.0, 2.0]), Err(Error::Degenerate(_))));
        let p = parse("pearson").unwrap();
        assert!(matches!(p.distance(&[5.0, 5.0, 5.0], &[1.0, 2.0, 3.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn head_tail_absolute() {
        assert_abs_diff_eq!(d("headtail:1:1", &[1.0, 2.0, 3.0], &[2.0, 2.0, 5.0]), 3.0);
        assert_abs_diff_eq!(d("headtail:1:1:sq", &[1.0, 2.0, 3.0], &[2.0, 2.0, 5.0]), 5.0);
    }

    #[test]
    fn head_tail_window_constraint() {
        let ht = parse("headtail:2:2").unwrap();
        assert!(ht.check_window(5).is_ok());
        assert!(ht.check_window(4).is_err());
        assert!(ht.distance(&[1.0; 4], &[1.0; 4]).is_err());
    }

    #[test]
    fn length_mismatch() {
        let e = parse("euclidean").unwrap();
        assert!(matches!(
            e.distance(&[1.0, 2.0], &[1.0]),
            Err(Error::LengthMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn lcs_examples() {
        assert_eq!(lcs_length(&[1., 2., 3.], &[1., 2., 3.], 0.5, 2).unwrap(), 3);
        assert_eq!(lcs_length(&[1., 5., 3.], &[1., 2., 3.], 0.5, 2).unwrap(), 2);
        assert_eq!(lcs_length(&[], &[1., 2., 3.], 0.5, 2).unwrap(), 0);
        assert!(lcs_length(&[1.0], &[1.0], 0.0, 0).is_err());
        assert_abs_diff_eq!(d("lcs:0.5:2", &[1., 5., 3.], &[1., 2., 3.]), 1.0);
    }

    #[test]
    fn lcs_index_tolerance_blocks_far_matches() {
        // equal values but shifted by two positions
        assert_eq!(lcs_length(&[9., 9., 1.], &[1., 8., 8.], 0.5, 1).unwrap(), 0);
        assert_eq!(lcs_length(&[9., 9., 1.], &[1., 8., 8.], 0.5, 2).unwrap(), 1);
    }

    /// Direct evaluation of the three-case recursion, exponential but exact.
    fn lcs_recursive(x: &[f64], y: &[f64], eps: f64, delta: usize) -> usize {
        if x.is_empty() || y.is_empty() {
            return 0;
        }
        let (k, m) = (x.len(), y.len());
        if (x[k - 1] - y[m - 1]).abs() < eps && k.abs_diff(m) <= delta {
            1 + lcs_recursive(&x[..k - 1], &y[..m - 1], eps, delta)
        } else {
            lcs_recursive(&x[..k - 1], y, eps, delta).max(lcs_recursive(x, &y[..m - 1], eps, delta))
        }
    }

    #[test]
    fn unknown_distance() {
        assert!(matches!(parse("dtw"), Err(Error::UnknownStrategy { .. })));
        assert!(parse("lp:0.5").is_err());
        assert!(parse("lcs:0:1").is_err());
    }

    #[test]
    fn specs_round_trip_through_registry() {
        for spec in [
            "euclidean", "weuclidean", "manhattan", "lp:3", "sup", "headtail:2:3",
            "headtail:1:1:sq", "cosine", "pearson", "canberra", "lcs:0.5:2",
        ] {
            assert_eq!(parse(spec).unwrap().spec(), spec);
        }
    }

    proptest! {
        #[test]
        fn lcs_table_matches_recursion(
            x in prop::collection::vec(0i32..4, 0..7),
            y in prop::collection::vec(0i32..4, 0..7),
            eps in 0.1f64..2.5, delta in 0usize..7
        ) {
            let x: Vec<f64> = x.into_iter().map(f64::from).collect();
            let y: Vec<f64> = y.into_iter().map(f64::from).collect();
            let table = lcs_length(&x, &y, eps, delta).unwrap();
            prop_assert_eq!(table, lcs_recursive(&x, &y, eps, delta));
            prop_assert!(table <= x.len().min(y.len()));
            prop_assert!(lcs_length(&x, &y, eps + 1.0, delta).unwrap() >= table);
        }
    }
}
