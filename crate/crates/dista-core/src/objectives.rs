//! Objective functions for centralized and networked sparse recovery.
//!
//! The centralized target is the Lasso-type functional
//!
//! ```text
//! J(x; lambda, tau) = sum_v ||y_v - A_v x||^2 + (2 lambda / tau) ||x||_1
//! ```
//!
//! over the pooled node data. Its networked counterpart `F` gives every
//! node its own estimate (the columns of an [`EstimateMatrix`]) and adds
//! a consensus penalty that couples neighbors through the averaging
//! matrix `P`. A separable surrogate `F^S` upper-bounds `F` and touches
//! it when its auxiliary blocks sit at the neighborhood averages; the
//! network iteration in [`crate::solvers`] is exactly the block
//! minimization of that surrogate.

use ndarray::ArrayView1;

use crate::error::{Error, Result};
use crate::graph::{apply_consensus, ConsensusMatrix};
use crate::numerics::{
    ensure_finite_mat, ensure_finite_vec, l1_norm, EstimateMatrix, Matrix, Vector,
};

/// One node's measurement operator and observations.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorData {
    id: usize,
    a: Matrix,
    y: Vector,
}

impl SensorData {
    /// Validates and wraps a node's `m x n` sensing matrix and length-`m`
    /// measurement vector. Requires `m < n`: every node individually is
    /// underdetermined, which is the regime this crate targets.
    pub fn new(id: usize, a: Matrix, y: Vector) -> Result<Self> {
        let (m, n) = a.dim();
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "node {id}: sensing matrix must be nonempty, got {m}x{n}"
            )));
        }
        if m >= n {
            return Err(Error::InvalidParameter(format!(
                "node {id}: expected fewer measurements than unknowns, got {m}x{n}"
            )));
        }
        if y.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "node {id}: {m} matrix rows but {} measurements",
                y.len()
            )));
        }
        ensure_finite_mat(&a, "sensing matrix")?;
        ensure_finite_vec(&y.view(), "measurements")?;
        Ok(SensorData { id, a, y })
    }

    /// Node identifier (its column index in the estimate matrix).
    pub fn id(&self) -> usize {
        self.id
    }

    /// The `m x n` sensing matrix.
    pub fn a(&self) -> &Matrix {
        &self.a
    }

    /// The length-`m` measurement vector.
    pub fn y(&self) -> &Vector {
        &self.y
    }

    /// Local measurement count `m`.
    pub fn measurement_count(&self) -> usize {
        self.a.nrows()
    }

    /// Signal dimension `n`.
    pub fn signal_len(&self) -> usize {
        self.a.ncols()
    }

    /// Replaces the measurement vector, keeping the sensing matrix.
    pub fn with_measurements(&self, y: Vector) -> Result<Self> {
        SensorData::new(self.id, self.a.clone(), y)
    }
}

/// Checks that `data` is a nonempty collection over a common signal
/// dimension and returns that dimension.
pub(crate) fn common_signal_len(data: &[SensorData]) -> Result<usize> {
    let first = data
        .first()
        .ok_or_else(|| Error::InvalidParameter("no sensor data given".into()))?;
    let n = first.signal_len();
    for d in data {
        if d.signal_len() != n {
            return Err(Error::ShapeMismatch(format!(
                "node {} has signal length {}, expected {n}",
                d.id(),
                d.signal_len()
            )));
        }
    }
    Ok(n)
}

/// Parameters of the centralized functional `J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoParams {
    /// Regularization level; the l1 weight in `J` is `2 lambda / tau`.
    pub lambda: f64,
    /// Gradient stepsize; must satisfy `tau < 1 / ||A||_2^2` for the
    /// centralized iteration to converge.
    pub tau: f64,
}

impl LassoParams {
    /// Validates `lambda > 0` and `tau > 0`.
    pub fn new(lambda: f64, tau: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be finite and positive, got {lambda}"
            )));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tau must be finite and positive, got {tau}"
            )));
        }
        Ok(LassoParams { lambda, tau })
    }
}

/// Parameters of the networked functional and its iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DistaParams {
    /// Blend between local gradient information and neighborhood
    /// averages, in `(0, 1]`. `q = 1` ignores the network entirely.
    pub q: f64,
    /// Soft-threshold level applied after every blended step.
    pub alpha: f64,
    /// Per-node stepsizes; node `v` must satisfy
    /// `tau[v] < 1 / ||A_v||_2^2`.
    pub tau: Vec<f64>,
}

impl DistaParams {
    /// Validates `0 < q <= 1`, `alpha > 0`, and positive stepsizes.
    pub fn new(q: f64, alpha: f64, tau: Vec<f64>) -> Result<Self> {
        if !(q.is_finite() && q > 0.0 && q <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "q must lie in (0, 1], got {q}"
            )));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite and positive, got {alpha}"
            )));
        }
        if tau.is_empty() {
            return Err(Error::InvalidParameter("no stepsizes given".into()));
        }
        for (v, &t) in tau.iter().enumerate() {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "stepsize for node {v} must be finite and positive, got {t}"
                )));
            }
        }
        Ok(DistaParams { q, alpha, tau })
    }

    /// Same stepsize `tau` for all `node_count` nodes.
    pub fn uniform(q: f64, alpha: f64, tau: f64, node_count: usize) -> Result<Self> {
        DistaParams::new(q, alpha, vec![tau; node_count])
    }

    /// Number of nodes these parameters describe.
    pub fn node_count(&self) -> usize {
        self.tau.len()
    }
}

pub(crate) fn check_network_shapes(
    x: &EstimateMatrix,
    data: &[SensorData],
    p_mat: &ConsensusMatrix,
    p: &DistaParams,
) -> Result<usize> {
    let n = common_signal_len(data)?;
    let nodes = data.len();
    if p_mat.node_count() != nodes {
        return Err(Error::ShapeMismatch(format!(
            "{nodes} data nodes but the consensus matrix has {}",
            p_mat.node_count()
        )));
    }
    if p.node_count() != nodes {
        return Err(Error::ShapeMismatch(format!(
            "{nodes} data nodes but {} stepsizes",
            p.node_count()
        )));
    }
    if x.dim() != (n, nodes) {
        return Err(Error::ShapeMismatch(format!(
            "estimate matrix is {:?}, expected ({n}, {nodes})",
            x.dim()
        )));
    }
    Ok(n)
}

fn squared_residual(a: &Matrix, x: &ArrayView1<'_, f64>, y: &Vector) -> f64 {
    let r = y - &a.dot(x);
    r.iter().map(|v| v * v).sum()
}

/// The centralized functional
/// `J(x) = sum_v ||y_v - A_v x||^2 + (2 lambda / tau) ||x||_1`.
pub fn lasso_objective(x: &Vector, data: &[SensorData], p: &LassoParams) -> Result<f64> {
    let n = common_signal_len(data)?;
    if x.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "x has length {}, expected {n}",
            x.len()
        )));
    }
    ensure_finite_vec(&x.view(), "lasso argument")?;
    let misfit: f64 = data
        .iter()
        .map(|d| squared_residual(d.a(), &x.view(), d.y()))
        .sum();
    Ok(misfit + 2.0 * p.lambda / p.tau * l1_norm(&x.view()))
}

/// Shared core of the two networked functionals; `l1_scale` is the
/// divisor applied to each node's l1 weight `2 alpha / tau_v`.
fn networked_functional(
    x: &EstimateMatrix,
    data: &[SensorData],
    p_mat: &ConsensusMatrix,
    p: &DistaParams,
    l1_scale: f64,
) -> Result<f64> {
    check_network_shapes(x, data, p_mat, p)?;
    ensure_finite_mat(x, "estimate matrix")?;
    let averaged = apply_consensus(x, p_mat)?;
    let weights = p_mat.weights();
    let mut total = 0.0;
    for (v, d) in data.iter().enumerate() {
        let xv = x.column(v);
        let misfit = squared_residual(d.a(), &xv, d.y());
        let l1 = 2.0 * p.alpha / (p.tau[v] * l1_scale) * l1_norm(&xv);
        let mut coupling = 0.0;
        for &w in p_mat.topology().neighbors(v) {
            let diff = &averaged.column(w) - &xv;
            coupling += weights[[v, w]] * diff.iter().map(|t| t * t).sum::<f64>();
        }
        total += p.q * misfit + l1 + (1.0 - p.q) / p.tau[v] * coupling;
    }
    Ok(total)
}

/// The networked functional
///
/// ```text
/// F(X) = sum_v [ q ||y_v - A_v x_v||^2
///              + (2 alpha / (tau_v N)) ||x_v||_1
///              + ((1 - q) / tau_v) sum_w P[v][w] ||xbar_w - x_v||^2 ]
/// ```
///
/// where `N` is the node count and `xbar` are the columns of `X P^T`.
/// When every column equals the same `x` and `alpha = q lambda` with
/// uniform stepsizes, `F` collapses to `q * J(x)`.
pub fn dista_functional(
    x: &EstimateMatrix,
    data: &[SensorData],
    p_mat: &ConsensusMatrix,
    p: &DistaParams,
) -> Result<f64> {
    networked_functional(x, data, p_mat, p, data.len() as f64)
}

/// The Lyapunov functional of the network iteration: identical to
/// [`dista_functional`] except that the l1 weight is `2 alpha / tau_v`
/// without the node-count divisor.
///
/// Block-minimizing the surrogate with threshold level `alpha` descends
/// *this* functional monotonically; [`dista_functional`] weights the l1
/// term `N` times lighter and therefore corresponds to the iteration
/// with threshold `alpha / N`. Solver reports trace the present
/// function so the reported objective is the one the iteration provably
/// decreases.
pub fn dista_descent_objective(
    x: &EstimateMatrix,
    data: &[SensorData],
    p_mat: &ConsensusMatrix,
    p: &DistaParams,
) -> Result<f64> {
    networked_functional(x, data, p_mat, p, 1.0)
}

/// The separable surrogate
///
/// ```text
/// F^S(X, C, B) = sum_v [ q ||A_v x_v - y_v||^2
///                      + (2 alpha / (tau_v N)) ||x_v||_1
///                      + ((1 - q) / (d tau_v)) sum_{w in N(v)} ||x_v - c_w||^2
///                      + (q / tau_v) ||x_v - b_v||^2
///                      - q ||A_v (x_v - b_v)||^2 ]
/// ```
///
/// defined on `d`-regular graphs with uniform weights. For stepsizes
/// below the spectral bound, `F^S(X, C, B) >= F(X)` for every `(C, B)`
/// with uniform stepsizes, with equality at `C = X P^T`, `B = X`.
pub fn surrogate_functional(
    x: &EstimateMatrix,
    c: &EstimateMatrix,
    b: &EstimateMatrix,
    data: &[SensorData],
    p_mat: &ConsensusMatrix,
    p: &DistaParams,
) -> Result<f64> {
    let n = check_network_shapes(x, data, p_mat, p)?;
    let nodes = data.len();
    if c.dim() != (n, nodes) || b.dim() != (n, nodes) {
        return Err(Error::ShapeMismatch(format!(
            "auxiliary blocks are {:?} and {:?}, expected ({n}, {nodes})",
            c.dim(),
            b.dim()
        )));
    }
    ensure_finite_mat(x, "estimate matrix")?;
    ensure_finite_mat(c, "first auxiliary block")?;
    ensure_finite_mat(b, "second auxiliary block")?;
    let d = p_mat.topology().regular_degree().ok_or_else(|| {
        Error::InvalidParameter("the surrogate is defined on regular graphs only".into())
    })? as f64;

    let mut total = 0.0;
    for (v, dat) in data.iter().enumerate() {
        let xv = x.column(v);
        let bv = b.column(v);
        let misfit = squared_residual(dat.a(), &xv, dat.y());
        let l1 = 2.0 * p.alpha / (p.tau[v] * nodes as f64) * l1_norm(&xv);
        let mut pull = 0.0;
        for &w in p_mat.topology().neighbors(v) {
            let diff = &xv - &c.column(w);
            pull += diff.iter().map(|t| t * t).sum::<f64>();
        }
        let anchor_diff = &xv - &bv;
        let anchor = anchor_diff.iter().map(|t| t * t).sum::<f64>();
        let a_diff = dat.a().dot(&anchor_diff);
        let curvature_credit: f64 = a_diff.iter().map(|t| t * t).sum();
        total += p.q * misfit + l1 + (1.0 - p.q) / (d * p.tau[v]) * pull
            + p.q / p.tau[v] * anchor
            - p.q * curvature_credit;
    }
    Ok(total)
}

/// Max-norm residual of the Lasso optimality conditions for `J`.
///
/// With `g = tau * sum_v A_v^T (y_v - A_v x)`, a minimizer satisfies
/// `g_i = lambda * sgn(x_i)` on the support and `|g_i| <= lambda` off
/// it; the residual is the largest violation across coordinates and is
/// zero exactly at minimizers of `J`.
pub fn kkt_residual(x: &Vector, data: &[SensorData], p: &LassoParams) -> Result<f64> {
    let n = common_signal_len(data)?;
    if x.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "x has length {}, expected {n}",
            x.len()
        )));
    }
    ensure_finite_vec(&x.view(), "kkt argument")?;
    let mut g = Vector::zeros(n);
    for d in data {
        let r = d.y() - &d.a().dot(x);
        g = g + d.a().t().dot(&r);
    }
    g *= p.tau;
    let mut worst = 0.0_f64;
    for i in 0..n {
        let viol = if x[i] > 0.0 {
            (g[i] - p.lambda).abs()
        } else if x[i] < 0.0 {
            (g[i] + p.lambda).abs()
        } else {
            (g[i].abs() - p.lambda).max(0.0)
        };
        worst = worst.max(viol);
    }
    Ok(worst)
}
