//! Iterative solvers for networked sparse recovery.
//!
//! Four solvers share one report format:
//!
//! * [`dista_run`] -- the main distributed iterative soft-thresholding
//!   scheme: neighborhood averaging blended with local gradient steps,
//!   followed by component-wise thresholding;
//! * [`ista_run`] -- centralized iterative soft thresholding on the
//!   pooled measurements, the reference the distributed scheme targets;
//! * [`dsm_run`] -- distributed subgradient descent, a classic baseline
//!   without a convergence guarantee at constant stepsize;
//! * [`admm_run`] -- consensus ADMM with per-node ridge subproblems,
//!   the standard high-accuracy (but memory-hungry) baseline.
//!
//! Every run starts from the all-zero estimate, traces one objective
//! value and one normalized step norm per iteration, and reports how it
//! stopped. Stepsize preconditions are enforced up front; the
//! `*_unchecked` variants exist for deliberate out-of-regime runs.

mod admm;
mod dista;
mod dsm;
mod ista;

pub use admm::admm_run;
pub use dista::{dista_gamma, dista_run, dista_run_unchecked};
pub use dsm::dsm_run;
pub use ista::{ista_run, ista_step};

use std::time::Duration;

use ndarray::Axis;

use crate::error::{Error, Result};
use crate::numerics::{spectral_norm, EstimateMatrix, Matrix, Vector};
use crate::objectives::SensorData;

/// Stopping rules shared by all solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminationCriteria {
    /// Convergence threshold on the normalized step
    /// `||X(t+1) - X(t)||_F / sqrt(n * node_count)`.
    pub eps: f64,
    /// Hard cap on iterations.
    pub max_iter: usize,
}

impl Default for TerminationCriteria {
    fn default() -> Self {
        TerminationCriteria {
            eps: 1e-8,
            max_iter: 50_000,
        }
    }
}

impl TerminationCriteria {
    /// Validates `eps > 0` and `max_iter >= 1`.
    pub fn validate(&self) -> Result<()> {
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "termination eps must be finite and positive, got {}",
                self.eps
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "termination max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    /// The normalized step norm fell below `eps`.
    Converged,
    /// The iteration budget ran out first.
    MaxIterations,
}

/// One traced iteration: the solver's objective after the step and the
/// normalized step norm that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub objective: f64,
    pub step_norm: f64,
}

/// Everything a solver run reports back.
///
/// `estimates` holds one column per node (a single column for the
/// centralized solver). `fixed_point_residual` is the Frobenius distance
/// `||T(X*) - X*||_F` where `T` is the solver's own one-iteration map
/// applied once more to the final state; for a converged run of a
/// nonexpansive iteration it is bounded by the step threshold times
/// `sqrt(n * node_count)`.
#[derive(Debug, Clone)]
pub struct SolverReport {
    pub estimates: EstimateMatrix,
    pub iterations: usize,
    pub termination: TerminationReason,
    pub trace: Vec<TraceRow>,
    pub fixed_point_residual: f64,
    pub wall_time: Duration,
}

impl SolverReport {
    /// True when the run stopped on the step-norm criterion.
    pub fn converged(&self) -> bool {
        self.termination == TerminationReason::Converged
    }

    /// Average of the node estimates (the estimate itself for
    /// single-column reports).
    pub fn node_average(&self) -> Vector {
        self.estimates
            .mean_axis(Axis(1))
            .expect("reports always carry at least one column")
    }
}

/// Result of checking one node's stepsize against its spectral bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepsizeCheck {
    pub node: usize,
    pub tau: f64,
    /// The admissible supremum `1 / ||A_v||_2^2`.
    pub bound: f64,
}

impl StepsizeCheck {
    /// True when `tau` lies strictly below the bound.
    pub fn ok(&self) -> bool {
        self.tau < self.bound
    }
}

/// Per-node stepsize report from [`validate_stepsizes`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepsizeReport {
    pub checks: Vec<StepsizeCheck>,
}

impl StepsizeReport {
    /// True when every node passes.
    pub fn all_ok(&self) -> bool {
        self.checks.iter().all(StepsizeCheck::ok)
    }

    /// The first failing node, if any.
    pub fn first_violation(&self) -> Option<&StepsizeCheck> {
        self.checks.iter().find(|c| !c.ok())
    }
}

/// Computes each node's spectral bound `1 / ||A_v||_2^2` and compares
/// the configured stepsizes against it. The networked solver refuses to
/// run when any node fails (see [`dista_run_unchecked`] to override).
pub fn validate_stepsizes(
    data: &[SensorData],
    p: &crate::objectives::DistaParams,
) -> Result<StepsizeReport> {
    if data.len() != p.node_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} data nodes but {} stepsizes",
            data.len(),
            p.node_count()
        )));
    }
    let mut checks = Vec::with_capacity(data.len());
    for (v, d) in data.iter().enumerate() {
        let norm = spectral_norm(d.a())?;
        checks.push(StepsizeCheck {
            node: v,
            tau: p.tau[v],
            bound: 1.0 / (norm * norm),
        });
    }
    Ok(StepsizeReport { checks })
}

pub(crate) fn stepsize_violation_error(report: &StepsizeReport) -> Option<Error> {
    report.first_violation().map(|c| Error::StepsizeViolation {
        node: c.node,
        tau: c.tau,
        bound: c.bound,
    })
}

/// Stacks per-node data into the pooled system `(A, y)` used by the
/// centralized solver: rows are concatenated in node order.
pub fn stack_sensors(data: &[SensorData]) -> Result<(Matrix, Vector)> {
    let n = crate::objectives::common_signal_len(data)?;
    let total_rows: usize = data.iter().map(SensorData::measurement_count).sum();
    let mut a = Matrix::zeros((total_rows, n));
    let mut y = Vector::zeros(total_rows);
    let mut row = 0;
    for d in data {
        let m = d.measurement_count();
        a.slice_mut(ndarray::s![row..row + m, ..]).assign(d.a());
        y.slice_mut(ndarray::s![row..row + m]).assign(d.y());
        row += m;
    }
    Ok((a, y))
}

/// Normalized Frobenius distance between consecutive iterates,
/// `||next - prev||_F / sqrt(count)` with `count` the number of entries.
pub(crate) fn normalized_step(next: &EstimateMatrix, prev: &EstimateMatrix) -> f64 {
    let count = (next.len()) as f64;
    let sq: f64 = next
        .iter()
        .zip(prev.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    (sq / count).sqrt()
}

/// Solvers whose working-set size is modeled by [`memory_footprint`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FootprintSolver {
    /// Distributed iterative soft thresholding: one node stores its
    /// sensing matrix, measurements, two length-`n` vectors (estimate
    /// and incoming average), and three scalars (q, alpha, tau).
    Dista,
    /// Consensus ADMM: sensing matrix, measurements, the cached `n x n`
    /// ridge inverse, three length-`n` vectors (estimate, consensus
    /// copy, dual), and two scalars (rho and the threshold level).
    ConsensusAdmm,
}

/// Number of scalar values a single node keeps resident for a solver,
/// as a function of signal length `n` and local measurement count `m`.
///
/// `Dista` needs `3 + m + m n + 2 n` values; `ConsensusAdmm` needs
/// `2 + m + m n + n^2 + 3 n` -- the quadratic term is the cached ridge
/// inverse and dominates for large `n`, which is why thresholding-based
/// nodes can handle far longer signals in fixed memory.
pub fn memory_footprint(solver: FootprintSolver, n: usize, m: usize) -> usize {
    match solver {
        FootprintSolver::Dista => 3 + m + m * n + 2 * n,
        FootprintSolver::ConsensusAdmm => 2 + m + m * n + n * n + 3 * n,
    }
}

/// Largest signal length `n` whose [`memory_footprint`] stays within
/// `budget` values, or `None` when even `n = 1` does not fit.
pub fn max_signal_len(solver: FootprintSolver, m: usize, budget: usize) -> Option<usize> {
    if memory_footprint(solver, 1, m) > budget {
        return None;
    }
    // Gallop past the budget, then binary search the boundary.
    let mut hi = 1usize;
    while memory_footprint(solver, hi, m) <= budget {
        match hi.checked_mul(2) {
            Some(next) => hi = next,
            None => return Some(hi),
        }
    }
    let mut lo = hi / 2; // still within budget
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if memory_footprint(solver, mid, m) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::DistaParams;
    use ndarray::{Array1, Array2};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn random_nodes(nodes: usize, m: usize, n: usize, seed: u64) -> Vec<SensorData> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        (0..nodes)
            .map(|v| {
                let a = Array2::from_shape_fn((m, n), |_| rng.sample(StandardNormal));
                let y = Array1::from_shape_fn(m, |_| rng.sample(StandardNormal));
                SensorData::new(v, a, y).unwrap()
            })
            .collect()
    }

    #[test]
    fn footprint_hand_values() {
        assert_eq!(memory_footprint(FootprintSolver::Dista, 1, 1), 7);
        assert_eq!(memory_footprint(FootprintSolver::Dista, 1364, 1), 4096);
        assert_eq!(memory_footprint(FootprintSolver::ConsensusAdmm, 61, 1), 3968);
    }

    #[test]
    fn footprint_is_monotone_in_n() {
        for solver in [FootprintSolver::Dista, FootprintSolver::ConsensusAdmm] {
            let mut prev = 0;
            for n in 1..200 {
                let f = memory_footprint(solver, n, 3);
                assert!(f > prev);
                prev = f;
            }
        }
    }

    #[test]
    fn max_signal_len_finds_the_boundary() {
        let budget = 1 << 12;
        let n_dista = max_signal_len(FootprintSolver::Dista, 1, budget).unwrap();
        assert_eq!(n_dista, 1364);
        assert!(memory_footprint(FootprintSolver::Dista, n_dista, 1) <= budget);
        assert!(memory_footprint(FootprintSolver::Dista, n_dista + 1, 1) > budget);

        let n_admm = max_signal_len(FootprintSolver::ConsensusAdmm, 1, budget).unwrap();
        assert!(memory_footprint(FootprintSolver::ConsensusAdmm, n_admm, 1) <= budget);
        assert!(memory_footprint(FootprintSolver::ConsensusAdmm, n_admm + 1, 1) > budget);
        // The quadratic term caps the ADMM node two orders of magnitude
        // below the thresholding node.
        assert!(n_admm < n_dista / 20);

        assert_eq!(max_signal_len(FootprintSolver::Dista, 1, 3), None);
    }

    #[test]
    fn stepsize_checks_flag_only_offending_nodes() {
        let data = random_nodes(3, 2, 10, 7);
        let mut taus = Vec::new();
        for (i, d) in data.iter().enumerate() {
            let s = spectral_norm(d.a()).unwrap();
            let bound = 1.0 / (s * s);
            // Node 1 violates, the others sit safely below the bound.
            taus.push(if i == 1 { bound * 1.5 } else { bound * 0.5 });
        }
        let p = DistaParams::new(0.5, 1e-3, taus).unwrap();
        let report = validate_stepsizes(&data, &p).unwrap();
        assert!(!report.all_ok());
        let bad = report.first_violation().unwrap();
        assert_eq!(bad.node, 1);
        assert!(!bad.ok());
        assert!(report.checks[0].ok() && report.checks[2].ok());
    }

    #[test]
    fn stepsizes_at_defaults_pass_on_typical_instances() {
        // Entries scaled like 1/sqrt(m) keep ||A_v||^2 near
        // (1 + sqrt(n/m))^2, comfortably above the default tau = 0.02.
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for seed in 0..10u64 {
            let m = 6 + (seed as usize) % 6;
            let n = 150;
            let scale = 1.0 / (m as f64).sqrt();
            let data: Vec<SensorData> = (0..4)
                .map(|v| {
                    let a = Array2::from_shape_fn((m, n), |_| {
                        rng.sample::<f64, _>(StandardNormal) * scale
                    });
                    let y = Array1::zeros(m);
                    SensorData::new(v, a, y).unwrap()
                })
                .collect();
            let p = DistaParams::uniform(0.5, 1e-4, 0.02, 4).unwrap();
            let report = validate_stepsizes(&data, &p).unwrap();
            assert!(report.all_ok(), "seed {seed}: {:?}", report.first_violation());
        }
    }

    #[test]
    fn stacking_concatenates_rows_in_node_order() {
        let data = random_nodes(3, 2, 5, 9);
        let (a, y) = stack_sensors(&data).unwrap();
        assert_eq!(a.dim(), (6, 5));
        assert_eq!(y.len(), 6);
        for (v, d) in data.iter().enumerate() {
            for r in 0..2 {
                assert_eq!(y[2 * v + r], d.y()[r]);
                for c in 0..5 {
                    assert_eq!(a[[2 * v + r, c]], d.a()[[r, c]]);
                }
            }
        }
    }
}
