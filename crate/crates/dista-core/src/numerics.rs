//! Dense numeric kernels shared by every solver.
//!
//! Exact, allocation-light routines over `f64`: the soft-thresholding
//! operator, sparse-recovery gradient steps, norms, a power-iteration
//! spectral norm estimator, and a small Cholesky solver used by the
//! quadratic subproblems. All functions validate shapes and reject
//! non-finite inputs at API boundaries; inner loops assume clean data.

use ndarray::{Array1, Array2, ArrayView1, ArrayViewMut1};

use crate::error::{Error, Result};

/// Dense column vector of `f64`.
pub type Vector = Array1<f64>;
/// Dense row-major matrix of `f64`.
pub type Matrix = Array2<f64>;
/// Node estimates stacked column-wise: column `v` is node `v`'s current
/// estimate, so the matrix is `n x node_count`.
pub type EstimateMatrix = Array2<f64>;

/// Default relative tolerance for the power-iteration norm estimate.
pub const NORM_TOL_DEFAULT: f64 = 1e-10;
/// Default iteration budget for the power-iteration norm estimate.
pub const NORM_MAX_ITER_DEFAULT: usize = 5_000;

/// Returns an error if any entry of `x` is NaN or infinite.
pub fn ensure_finite_vec(x: &ArrayView1<'_, f64>, what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} contains NaN or Inf")))
    }
}

/// Returns an error if any entry of `a` is NaN or infinite.
pub fn ensure_finite_mat(a: &Matrix, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} contains NaN or Inf")))
    }
}

/// Scalar soft threshold: shrink `x` toward zero by `alpha`, mapping
/// everything with `|x| <= alpha` (boundary included) to exactly `0.0`.
#[inline]
pub fn soft_threshold_scalar(x: f64, alpha: f64) -> f64 {
    if x > alpha {
        x - alpha
    } else if x < -alpha {
        x + alpha
    } else {
        0.0
    }
}

/// Component-wise soft-thresholding operator.
///
/// Requires `alpha >= 0`; `alpha = 0` is the identity.
pub fn soft_threshold(x: &Vector, alpha: f64) -> Result<Vector> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "soft threshold level must be finite and nonnegative, got {alpha}"
        )));
    }
    Ok(x.mapv(|v| soft_threshold_scalar(v, alpha)))
}

/// In-place soft threshold over a column view; `alpha` must already be
/// validated by the caller.
pub(crate) fn soft_threshold_mut(mut x: ArrayViewMut1<'_, f64>, alpha: f64) {
    debug_assert!(alpha >= 0.0);
    x.mapv_inplace(|v| soft_threshold_scalar(v, alpha));
}

/// Sign function with `sgn(0) = 0`, as used in the subgradient of `|x|`.
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// One Landweber / gradient step for the quadratic data term:
/// `x + tau * A^T (y - A x)`.
pub fn gradient_step(x: &Vector, a: &Matrix, y: &Vector, tau: f64) -> Result<Vector> {
    let (m, n) = a.dim();
    if x.len() != n || y.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "gradient step: A is {m}x{n} but x has length {} and y has length {}",
            x.len(),
            y.len()
        )));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gradient stepsize must be finite and positive, got {tau}"
        )));
    }
    let residual = y - &a.dot(x);
    Ok(x + &(tau * a.t().dot(&residual)))
}

/// Frobenius norm of a matrix.
pub fn frobenius_norm(a: &Matrix) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Euclidean norm of a vector.
pub fn l2_norm(x: &ArrayView1<'_, f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Sum of absolute values of a vector.
pub fn l1_norm(x: &ArrayView1<'_, f64>) -> f64 {
    x.iter().map(|v| v.abs()).sum::<f64>()
}

/// Spectral norm `||A||_2` estimated by power iteration on `A^T A`.
///
/// The start vector is the deterministic normalized all-ones vector, so
/// repeated calls are reproducible. Iteration stops once the Rayleigh
/// estimate of the top eigenvalue of `A^T A` changes by less than
/// `tol` in relative terms; if that never happens within `max_iter`
/// steps the last estimate is reported inside [`Error::NormEstimate`].
///
/// `A` must be nonzero: the spectral norm of an all-zero matrix is well
/// defined but a zero matrix almost always signals an upstream bug here,
/// so it is rejected.
pub fn operator_norm(a: &Matrix, tol: f64, max_iter: usize) -> Result<f64> {
    let (m, n) = a.dim();
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter(
            "operator norm of an empty matrix".into(),
        ));
    }
    ensure_finite_mat(a, "operator norm input")?;
    if a.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidParameter(
            "operator norm requires a nonzero matrix".into(),
        ));
    }
    if !(tol.is_finite() && tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidParameter(
            "operator norm needs tol > 0 and max_iter >= 1".into(),
        ));
    }

    let mut v = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut lambda_prev = 0.0_f64;
    let mut restarts = 0usize;
    for it in 0..max_iter {
        let w = a.dot(&v); // A v
        let lambda = w.iter().map(|x| x * x).sum::<f64>(); // Rayleigh quotient of A^T A
        let z = a.t().dot(&w); // A^T A v
        let z_norm = l2_norm(&z.view());
        if z_norm == 0.0 {
            // v landed exactly in the null space; restart from a basis vector.
            if restarts >= n {
                return Err(Error::NormEstimate {
                    last: lambda.sqrt(),
                    iterations: it,
                });
            }
            v.fill(0.0);
            v[restarts % n] = 1.0;
            restarts += 1;
            lambda_prev = 0.0;
            continue;
        }
        if it > 0 && (lambda - lambda_prev).abs() <= tol * lambda.max(f64::MIN_POSITIVE) {
            return Ok(lambda.sqrt());
        }
        lambda_prev = lambda;
        v = z / z_norm;
    }
    Err(Error::NormEstimate {
        last: lambda_prev.sqrt(),
        iterations: max_iter,
    })
}

/// [`operator_norm`] with the crate's default tolerance and budget.
pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    operator_norm(a, NORM_TOL_DEFAULT, NORM_MAX_ITER_DEFAULT)
}

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
///
/// `A` must be symmetric positive definite; the factorization fails with
/// an error otherwise. Used for the ridge systems inside the consensus
/// ADMM baseline, where `A = A_v^T A_v + rho I` is SPD by construction.
pub fn cholesky_factor(a: &Matrix) -> Result<Matrix> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(Error::ShapeMismatch(format!(
            "cholesky needs a square matrix, got {rows}x{cols}"
        )));
    }
    ensure_finite_mat(a, "cholesky input")?;
    let n = rows;
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "cholesky: matrix is not positive definite".into(),
                    ));
                }
                l[[i, j]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Solves `L L^T x = b` given the lower-triangular factor from
/// [`cholesky_factor`].
pub fn cholesky_solve(l: &Matrix, b: &Vector) -> Result<Vector> {
    let n = l.nrows();
    if l.ncols() != n || b.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "cholesky solve: factor is {}x{}, rhs has length {}",
            l.nrows(),
            l.ncols(),
            b.len()
        )));
    }
    // Forward substitution: L z = b.
    let mut z = b.clone();
    for i in 0..n {
        for k in 0..i {
            let t = z[k];
            z[i] -= l[[i, k]] * t;
        }
        z[i] /= l[[i, i]];
    }
    // Back substitution: L^T x = z.
    let mut x = z;
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let t = x[k];
            x[i] -= l[[k, i]] * t;
        }
        x[i] /= l[[i, i]];
    }
    Ok(x)
}
