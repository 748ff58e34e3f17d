//! Distributed iterative soft thresholding over a network.
//!
//! Each sweep applies the network operator `Gamma` once: every node
//! averages its neighbors' estimates through `P` *twice* (once to form
//! the incoming messages, once to average those messages), blends the
//! result with a local thresholded-Landweber direction, and shrinks:
//!
//! ```text
//! (Gamma X)_v = eta_alpha[ (1 - q) (Xbar P^T)_v
//!                        + q (x_v + tau_v A_v^T (y_v - A_v x_v)) ],
//! Xbar = X P^T.
//! ```
//!
//! For stepsizes below each node's spectral bound the operator is
//! nonexpansive, the iterates converge, and the Lyapunov objective
//! ([`crate::objectives::dista_descent_objective`]) decreases at every
//! sweep; that objective is what the run traces.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::graph::{apply_consensus, ConsensusMatrix};
use crate::numerics::{gradient_step, soft_threshold_scalar, EstimateMatrix};
use crate::objectives::{check_network_shapes, dista_descent_objective, DistaParams, SensorData};
use crate::solvers::{
    normalized_step, stepsize_violation_error, validate_stepsizes, SolverReport,
    TerminationCriteria, TerminationReason, TraceRow,
};

/// One application of the network operator `Gamma`.
pub fn dista_gamma(
    x: &EstimateMatrix,
    data: &[SensorData],
    p_mat: &ConsensusMatrix,
    p: &DistaParams,
) -> Result<EstimateMatrix> {
    check_network_shapes(x, data, p_mat, p)?;
    let averaged = apply_consensus(x, p_mat)?; // incoming messages
    let mixed = apply_consensus(&averaged, p_mat)?; // averaged messages
    let mut out = EstimateMatrix::zeros(x.raw_dim());
    for (v, d) in data.iter().enumerate() {
        let xv = x.column(v).to_owned();
        let grad = gradient_step(&xv, d.a(), d.y(), p.tau[v])?;
        let mut col = out.column_mut(v);
        for i in 0..grad.len() {
            let blended = (1.0 - p.q) * mixed[[i, v]] + p.q * grad[i];
            col[i] = soft_threshold_scalar(blended, p.alpha);
        }
    }
    Ok(out)
}

fn run_gamma_loop(
    data: &[SensorData],
    p_mat: &ConsensusMatrix,
    p: &DistaParams,
    term: &TerminationCriteria,
) -> Result<SolverReport> {
    term.validate()?;
    let problems = p_mat.validate();
    if let Some(problem) = problems.first() {
        return Err(Error::InvalidParameter(format!(
            "consensus matrix is invalid: {problem}"
        )));
    }
    let n = data
        .first()
        .map(SensorData::signal_len)
        .ok_or_else(|| Error::InvalidParameter("no sensor data given".into()))?;
    let nodes = data.len();

    let start = Instant::now();
    let mut x = EstimateMatrix::zeros((n, nodes));
    let mut trace = Vec::new();
    let mut reason = TerminationReason::MaxIterations;
    let mut iterations = 0;
    for _ in 0..term.max_iter {
        let next = dista_gamma(&x, data, p_mat, p)?;
        iterations += 1;
        let step = normalized_step(&next, &x);
        let objective = dista_descent_objective(&next, data, p_mat, p)?;
        if !objective.is_finite() {
            return Err(Error::Diverged(format!(
                "network objective became {objective} at sweep {iterations}"
            )));
        }
        trace.push(TraceRow {
            objective,
            step_norm: step,
        });
        x = next;
        if step < term.eps {
            reason = TerminationReason::Converged;
            break;
        }
    }
    let once_more = dista_gamma(&x, data, p_mat, p)?;
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

/// Runs the distributed thresholding iteration from the all-zero
/// estimate until the normalized step norm falls below `term.eps` or
/// the sweep budget runs out.
///
/// Refuses to start when any node's stepsize reaches its spectral bound
/// `1 / ||A_v||_2^2`; use [`dista_run_unchecked`] to experiment outside
/// the supported regime.
pub fn dista_run(
    data: &[SensorData],
    p_mat: &ConsensusMatrix,
    p: &DistaParams,
    term: &TerminationCriteria,
) -> Result<SolverReport> {
    let report = validate_stepsizes(data, p)?;
    if let Some(err) = stepsize_violation_error(&report) {
        return Err(err);
    }
    run_gamma_loop(data, p_mat, p, term)
}

/// [`dista_run`] without the stepsize precondition. Convergence and
/// objective descent are not guaranteed here; runs may stop only on the
/// iteration budget or abort with [`Error::Diverged`].
pub fn dista_run_unchecked(
    data: &[SensorData],
    p_mat: &ConsensusMatrix,
    p: &DistaParams,
    term: &TerminationCriteria,
) -> Result<SolverReport> {
    run_gamma_loop(data, p_mat, p, term)
}
