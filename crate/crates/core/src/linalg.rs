//! Normal-equation least squares with a ridge fallback.

use crate::error::{Error, Result};

/// Ridge added to the Gram diagonal when it is numerically singular.
pub const RIDGE_LAMBDA: f64 = 1e-8;

const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    pub regularized: bool,
}

/// Solves `min ‖X·b − y‖²` for row-major `rows` of `X`.
pub fn least_squares<'a, I>(rows: I, targets: &[f64], n_cols: usize) -> Result<LeastSquares>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut gram = vec![0.0; n_cols * n_cols];
    let mut rhs = vec![0.0; n_cols];
    let mut n_rows = 0;
    for (row, &y) in rows.into_iter().zip(targets) {
        if row.len() != n_cols {
            return Err(Error::LengthMismatch {
                expected: n_cols,
                found: row.len(),
            });
        }
        for i in 0..n_cols {
            rhs[i] += row[i] * y;
            for j in 0..=i {
                gram[i * n_cols + j] += row[i] * row[j];
            }
        }
        n_rows += 1;
    }
    if n_rows != targets.len() {
        return Err(Error::LengthMismatch {
            expected: targets.len(),
            found: n_rows,
        });
    }
    for i in 0..n_cols {
        for j in 0..i {
            gram[j * n_cols + i] = gram[i * n_cols + j];
        }
    }

    if let Some(coefficients) = cholesky_solve(&gram, &rhs, n_cols, PIVOT_TOLERANCE) {
        return finite(coefficients, false);
    }
    for i in 0..n_cols {
        gram[i * n_cols + i] += RIDGE_LAMBDA;
    }
    match cholesky_solve(&gram, &rhs, n_cols, 0.0) {
        Some(coefficients) => finite(coefficients, true),
        None => Err(Error::Solve("Gram matrix not positive definite after ridge".into())),
    }
}

fn finite(coefficients: Vec<f64>, regularized: bool) -> Result<LeastSquares> {
    if coefficients.iter().all(|c| c.is_finite()) {
        Ok(LeastSquares {
            coefficients,
            regularized,
        })
    } else {
        Err(Error::Solve("non-finite coefficients".into()))
    }
}

/// Cholesky solve of a symmetric system; `None` when a pivot falls below
/// `rel_tol` times the largest diagonal entry.
fn cholesky_solve(a: &[f64], b: &[f64], n: usize, rel_tol: f64) -> Option<Vec<f64>> {
    let scale = (0..n).map(|i| a[i * n + i]).fold(0.0, f64::max);
    if scale <= 0.0 {
        return None;
    }
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= rel_tol * scale || sum <= 0.0 {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * z[k]).sum();
        z[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (z[i] - s) / l[i * n + i];
    }
    Some(x)
}
