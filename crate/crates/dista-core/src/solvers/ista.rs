//! Centralized iterative soft thresholding on the pooled measurements.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::numerics::{
    ensure_finite_vec, gradient_step, l1_norm, soft_threshold, spectral_norm, Matrix, Vector,
};
use crate::objectives::LassoParams;
use crate::solvers::{SolverReport, TerminationCriteria, TerminationReason, TraceRow};

/// One thresholded gradient step:
/// `eta_lambda(x + tau A^T (y - A x))`.
pub fn ista_step(x: &Vector, a: &Matrix, y: &Vector, p: &LassoParams) -> Result<Vector> {
    soft_threshold(&gradient_step(x, a, y, p.tau)?, p.lambda)
}

fn pooled_objective(x: &Vector, a: &Matrix, y: &Vector, p: &LassoParams) -> f64 {
    let r = y - &a.dot(x);
    let misfit: f64 = r.iter().map(|v| v * v).sum();
    misfit + 2.0 * p.lambda / p.tau * l1_norm(&x.view())
}

/// Runs iterative soft thresholding from the zero vector on the pooled
/// system `(A, y)` (see [`crate::solvers::stack_sensors`]).
///
/// Requires `tau < 1 / ||A||_2^2`, which makes the iteration map
/// nonexpansive and the traced objective monotone non-increasing. The
/// report carries a single estimate column.
pub fn ista_run(
    a: &Matrix,
    y: &Vector,
    p: &LassoParams,
    term: &TerminationCriteria,
) -> Result<SolverReport> {
    term.validate()?;
    let (m, n) = a.dim();
    if y.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "A is {m}x{n} but y has length {}",
            y.len()
        )));
    }
    ensure_finite_vec(&y.view(), "measurements")?;
    let norm = spectral_norm(a)?;
    let bound = 1.0 / (norm * norm);
    if p.tau >= bound {
        return Err(Error::StepsizeViolation {
            node: 0,
            tau: p.tau,
            bound,
        });
    }

    let start = Instant::now();
    let mut x = Vector::zeros(n);
    let mut trace = Vec::new();
    let mut reason = TerminationReason::MaxIterations;
    let mut iterations = 0;
    for _ in 0..term.max_iter {
        let next = ista_step(&x, a, y, p)?;
        iterations += 1;
        let step_sq: f64 = next
            .iter()
            .zip(x.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let step = (step_sq / n as f64).sqrt();
        let objective = pooled_objective(&next, a, y, p);
        if !objective.is_finite() {
            return Err(Error::Diverged(format!(
                "pooled objective became {objective} at iteration {iterations}"
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
    let once_more = ista_step(&x, a, y, p)?;
    let fixed_point_residual = (&once_more - &x).iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(SolverReport {
        estimates: x.insert_axis(ndarray::Axis(1)),
        iterations,
        termination: reason,
        trace,
        fixed_point_residual,
        wall_time: start.elapsed(),
    })
}
