//! Closed-form ridge regression with an unpenalized intercept.
//!
//! Columns and targets are centered, so the intercept absorbs the means and
//! only the slopes are shrunk. The normal equations are solved in whichever
//! space is smaller: primal (d x d) when features are few, dual (n x n)
//! otherwise; both give the same estimate.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit<R> {
    pub weights: Vec<R>,
    pub intercept: R,
}

impl<R: Real> RidgeFit<R> {
    pub fn predict(&self, row: &[R]) -> R {
        let mut y = self.intercept;
        for (&w, &x) in self.weights.iter().zip(row) {
            y = y + w * x;
        }
        y
    }
}

/// Fit `y ~ X w + b` with L2 penalty `lambda` on `w` only.
pub fn fit_ridge<R: Real>(x: &[Vec<R>], y: &[R], lambda: R) -> Result<RidgeFit<R>> {
    let n = x.len();
    if n == 0 || y.len() != n {
        return Err(Error::LengthMismatch {
            pred: n,
            gold: y.len(),
        });
    }
    let d = x[0].len();
    if x.iter().any(|row| row.len() != d) {
        return Err(Error::InvalidParameter {
            name: "x",
            reason: "ragged design matrix".to_string(),
        });
    }
    if lambda <= R::zero() {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: "ridge penalty must be positive".to_string(),
        });
    }

    let n_r = R::from_usize_lossy(n);
    let col_means: Vec<R> = (0..d)
        .map(|j| x.iter().map(|row| row[j]).sum::<R>() / n_r)
        .collect();
    let y_mean = y.iter().cloned().sum::<R>() / n_r;
    let xc: Vec<Vec<R>> = x
        .iter()
        .map(|row| row.iter().zip(&col_means).map(|(&v, &m)| v - m).collect())
        .collect();
    let yc: Vec<R> = y.iter().map(|&v| v - y_mean).collect();

    let weights = if d <= n {
        solve_primal(&xc, &yc, d, lambda)
    } else {
        solve_dual(&xc, &yc, lambda)
    };
    let intercept = y_mean
        - col_means
            .iter()
            .zip(&weights)
            .map(|(&m, &w)| m * w)
            .sum::<R>();
    Ok(RidgeFit { weights, intercept })
}

/// `(Xc' Xc + lambda I) w = Xc' y`.
fn solve_primal<R: Real>(xc: &[Vec<R>], yc: &[R], d: usize, lambda: R) -> Vec<R> {
    let mut gram = vec![vec![R::zero(); d]; d];
    for row in xc {
        for (j, &vj) in row.iter().enumerate() {
            if vj == R::zero() {
                continue;
            }
            for (k, &vk) in row.iter().enumerate() {
                gram[j][k] = gram[j][k] + vj * vk;
            }
        }
    }
    for (j, row) in gram.iter_mut().enumerate() {
        row[j] = row[j] + lambda;
    }
    let rhs: Vec<R> = (0..d)
        .map(|j| xc.iter().zip(yc).map(|(row, &y)| row[j] * y).sum())
        .collect();
    cholesky_solve(gram, rhs)
}

/// `w = Xc' alpha` with `(Xc Xc' + lambda I) alpha = y`.
fn solve_dual<R: Real>(xc: &[Vec<R>], yc: &[R], lambda: R) -> Vec<R> {
    let n = xc.len();
    let d = xc[0].len();
    let mut kernel = vec![vec![R::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let dot: R = xc[i].iter().zip(&xc[j]).map(|(&a, &b)| a * b).sum();
            kernel[i][j] = dot;
            kernel[j][i] = dot;
        }
        kernel[i][i] = kernel[i][i] + lambda;
    }
    let alpha = cholesky_solve(kernel, yc.to_vec());
    (0..d)
        .map(|j| xc.iter().zip(&alpha).map(|(row, &a)| row[j] * a).sum())
        .collect()
}

/// Solve `A x = b` for symmetric positive-definite `A` by Cholesky
/// factorization. The ridge term guarantees positive-definiteness.
#[allow(clippy::needless_range_loop)]
fn cholesky_solve<R: Real>(mut a: Vec<Vec<R>>, mut b: Vec<R>) -> Vec<R> {
    let n = a.len();
    // Lower-triangular factor, in place.
    for j in 0..n {
        for k in 0..j {
            let l_jk = a[j][k];
            for i in j..n {
                let l_ik = a[i][k];
                a[i][j] = a[i][j] - l_ik * l_jk;
            }
        }
        let pivot = a[j][j].sqrt();
        for i in j..n {
            a[i][j] = a[i][j] / pivot;
        }
    }
    // Forward substitution: L z = b.
    for i in 0..n {
        for k in 0..i {
            let prev = b[k];
            b[i] = b[i] - a[i][k] * prev;
        }
        b[i] = b[i] / a[i][i];
    }
    // Back substitution: L' x = z.
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let prev = b[k];
            b[i] = b[i] - a[k][i] * prev;
        }
        b[i] = b[i] / a[i][i];
    }
    b
}
