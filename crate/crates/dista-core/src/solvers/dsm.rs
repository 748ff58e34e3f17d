//! Distributed subgradient method, the classic low-cost baseline.
//!
//! Every node averages its neighbors' estimates through `P` (a single
//! pass) and then takes a constant-stepsize subgradient step on its
//! local cost
//!
//! ```text
//! f_v(x) = ||y_v - A_v x||^2 + (2 lambda / (tau N)) ||x||_1,
//! ```
//!
//! whose sum over the network is the pooled functional `J`. With a
//! constant stepsize the method has no convergence guarantee: runs are
//! expected to stop on the iteration budget and hover in a neighborhood
//! whose radius scales with the stepsize.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::graph::{apply_consensus, ConsensusMatrix};
use crate::numerics::{sgn, EstimateMatrix};
use crate::objectives::{lasso_objective, LassoParams, SensorData};
use crate::solvers::{
    normalized_step, SolverReport, TerminationCriteria, TerminationReason, TraceRow,
};

fn dsm_sweep(
    x: &EstimateMatrix,
    data: &[SensorData],
    p_mat: &ConsensusMatrix,
    gamma: f64,
    l1_weight: f64,
) -> Result<EstimateMatrix> {
    let mut next = apply_consensus(x, p_mat)?;
    for (v, d) in data.iter().enumerate() {
        let xv = x.column(v);
        let residual = d.y() - &d.a().dot(&xv);
        let grad = d.a().t().dot(&residual); // -(1/2) gradient of the misfit
        let mut col = next.column_mut(v);
        for i in 0..col.len() {
            let sub = -2.0 * grad[i] + l1_weight * sgn(xv[i]);
            col[i] -= gamma * sub;
        }
    }
    Ok(next)
}

/// Runs the distributed subgradient method from the all-zero estimate.
///
/// `gamma` is the constant stepsize; `p.lambda` and `p.tau` fix the l1
/// weight `2 lambda / (tau N)` of each local cost so that the network
/// total matches the pooled functional `J`. The trace reports `J` at
/// the node average. Termination on the step-norm criterion is rare by
/// design; reports typically flag [`TerminationReason::MaxIterations`].
pub fn dsm_run(
    data: &[SensorData],
    p_mat: &ConsensusMatrix,
    gamma: f64,
    p: &LassoParams,
    term: &TerminationCriteria,
) -> Result<SolverReport> {
    term.validate()?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "subgradient stepsize must be finite and positive, got {gamma}"
        )));
    }
    if let Some(problem) = p_mat.validate().first() {
        return Err(Error::InvalidParameter(format!(
            "consensus matrix is invalid: {problem}"
        )));
    }
    let n = crate::objectives::common_signal_len(data)?;
    let nodes = data.len();
    if p_mat.node_count() != nodes {
        return Err(Error::ShapeMismatch(format!(
            "{nodes} data nodes but the consensus matrix has {}",
            p_mat.node_count()
        )));
    }
    let l1_weight = 2.0 * p.lambda / (p.tau * nodes as f64);

    let start = Instant::now();
    let mut x = EstimateMatrix::zeros((n, nodes));
    let mut trace = Vec::new();
    let mut reason = TerminationReason::MaxIterations;
    let mut iterations = 0;
    for _ in 0..term.max_iter {
        let next = dsm_sweep(&x, data, p_mat, gamma, l1_weight)?;
        iterations += 1;
        let step = normalized_step(&next, &x);
        x = next;
        let avg = x
            .mean_axis(ndarray::Axis(1))
            .expect("estimate matrix always has at least one column");
        let objective = lasso_objective(&avg, data, p)?;
        if !objective.is_finite() {
            return Err(Error::Diverged(format!(
                "pooled objective became {objective} at sweep {iterations} \
                 (stepsize too large for this instance)"
            )));
        }
        trace.push(TraceRow {
            objective,
            step_norm: step,
        });
        if step < term.eps {
            reason = TerminationReason::Converged;
            break;
        }
    }
    let once_more = dsm_sweep(&x, data, p_mat, gamma, l1_weight)?;
    let fixed_point_residual = once_more
        .iter()
        .zip(x.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(SolverReport {
        estimates: x,
        iterations,
        termination: reason,
        trace,
        fixed_point_residual,
        wall_time: start.elapsed(),
    })
}
