//! Monte Carlo experiment harness: synthetic instances, noise
//! calibration, recovery metrics, and the two campaign drivers
//! (recovery-probability grid and MSE-vs-SNR sweep).
//!
//! # Determinism
//!
//! Every campaign is a pure function of its configuration and master
//! seed. Per-trial randomness is derived by a counter-based split: the
//! master seed keys a ChaCha12 generator and the trial's global index
//! selects its stream, so neither enumeration order nor the worker
//! count can change any result. Trials are independent work items run
//! on a rayon pool; results are collected in input order, which keeps
//! rendered CSV output byte-identical across worker counts.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{build_complete, build_d_regular, ConsensusMatrix};
use crate::numerics::{ensure_finite_vec, EstimateMatrix, Matrix, Vector};
use crate::objectives::{DistaParams, LassoParams, SensorData};
use crate::solvers::{
    admm_run, dista_run, dsm_run, ista_run, stack_sensors, SolverReport, TerminationCriteria,
};

/// Estimates with MSE below this threshold count as exact recovery.
pub const RECOVERY_MSE_THRESHOLD: f64 = 1e-4;

/// A synthetic k-sparse ground-truth signal.
#[derive(Debug, Clone)]
pub struct SparseSignal {
    /// Ground truth, length `n`, exactly `support.len()` nonzeros.
    pub x0: Vector,
    /// Sorted indices of the nonzero entries.
    pub support: Vec<usize>,
    /// Seed the signal was drawn from.
    pub seed: u64,
}

/// Draws a k-sparse signal: support uniform without replacement,
/// nonzero values i.i.d. standard normal. Deterministic per seed.
pub fn generate_signal(n: usize, k: usize, seed: u64) -> Result<SparseSignal> {
    if k > n {
        return Err(Error::InvalidParameter(format!(
            "sparsity {k} exceeds signal length {n}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut support = rand::seq::index::sample(&mut rng, n, k).into_vec();
    support.sort_unstable();
    let mut x0 = Vector::zeros(n);
    for &i in &support {
        x0[i] = rng.sample(StandardNormal);
    }
    Ok(SparseSignal { x0, support, seed })
}

/// Draws one sensing matrix per node, entries i.i.d. Gaussian with
/// mean zero and variance `1/m`. Measurements are left at zero; attach
/// them with [`SensorData::with_measurements`] once a signal exists.
/// Each node reads its own RNG stream, so node `v`'s matrix depends
/// only on `(seed, v, m, n)` and not on the node count.
pub fn generate_sensing(node_count: usize, m: usize, n: usize, seed: u64) -> Result<Vec<SensorData>> {
    if node_count == 0 {
        return Err(Error::InvalidParameter(
            "at least one node is required".into(),
        ));
    }
    let scale = 1.0 / (m as f64).sqrt();
    (0..node_count)
        .map(|v| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(v as u64);
            let a = Matrix::from_shape_fn((m, n), |_| {
                rng.sample::<f64, _>(StandardNormal) * scale
            });
            SensorData::new(v, a, Vector::zeros(m))
        })
        .collect()
}

/// Noise level requested for a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetSnr {
    /// No noise at all; measurements pass through unchanged.
    Infinite,
    /// Signal-to-noise ratio on the linear (not dB) scale.
    Linear(f64),
}

impl TargetSnr {
    /// Converts a decibel value; infinite dB maps to the noise-free flag.
    pub fn from_db(db: f64) -> Self {
        if db.is_infinite() && db > 0.0 {
            TargetSnr::Infinite
        } else {
            TargetSnr::Linear(10f64.powf(db / 10.0))
        }
    }
}

/// Adds i.i.d. Gaussian noise calibrated against the realized clean
/// measurement energy: the variance solves
/// `sum_v ||y_v||^2 / (m N sigma^2) = target`, so the requested SNR is
/// exact in expectation for these measurements. Returns the perturbed
/// data together with the realized empirical SNR (infinite when no
/// noise was requested).
pub fn apply_noise(
    data: &[SensorData],
    target: TargetSnr,
    seed: u64,
) -> Result<(Vec<SensorData>, f64)> {
    let snr = match target {
        TargetSnr::Infinite => return Ok((data.to_vec(), f64::INFINITY)),
        TargetSnr::Linear(s) => s,
    };
    if !(snr.is_finite() && snr > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target SNR must be positive and finite, got {snr}"
        )));
    }
    let clean_energy: f64 = data
        .iter()
        .map(|d| d.y().iter().map(|v| v * v).sum::<f64>())
        .sum();
    let sample_count: usize = data.iter().map(|d| d.measurement_count()).sum();
    if clean_energy <= 0.0 {
        return Err(Error::InvalidParameter(
            "cannot calibrate a finite SNR against zero-energy measurements".into(),
        ));
    }
    let sigma = (clean_energy / (sample_count as f64 * snr)).sqrt();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut noise_energy = 0.0;
    let noisy = data
        .iter()
        .map(|d| {
            let xi =
                Vector::from_shape_fn(d.measurement_count(), |_| {
                    rng.sample::<f64, _>(StandardNormal) * sigma
                });
            noise_energy += xi.iter().map(|v| v * v).sum::<f64>();
            d.with_measurements(d.y() + &xi)
        })
        .collect::<Result<Vec<_>>>()?;
    let realized = if noise_energy > 0.0 {
        clean_energy / noise_energy
    } else {
        f64::INFINITY
    };
    Ok((noisy, realized))
}

/// Per-trial quality metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSet {
    /// `sum_v ||x0 - x*_v||^2 / (n N)`.
    pub mse: f64,
    /// True exactly when `mse` is below [`RECOVERY_MSE_THRESHOLD`].
    pub recovered: bool,
    /// Empirical SNR of the measurements the solver saw (infinite for
    /// noise-free trials).
    pub snr_realized: f64,
}

/// Scores a network estimate against the ground truth.
pub fn evaluate(x_star: &EstimateMatrix, x0: &Vector, snr_realized: f64) -> Result<MetricSet> {
    let (n, node_count) = x_star.dim();
    if n != x0.len() || node_count == 0 {
        return Err(Error::ShapeMismatch(format!(
            "estimates are {n}x{node_count} but the signal has length {}",
            x0.len()
        )));
    }
    ensure_finite_vec(&x0.view(), "ground-truth signal")?;
    let mut total = 0.0;
    for v in 0..node_count {
        let col = x_star.column(v);
        total += col
            .iter()
            .zip(x0.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("estimate matrix".into()));
    }
    let mse = total / (n as f64 * node_count as f64);
    Ok(MetricSet {
        mse,
        recovered: mse < RECOVERY_MSE_THRESHOLD,
        snr_realized,
    })
}

/// Communication graph requested for a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologySpec {
    /// All-to-all links with uniform `1/N` weights.
    Complete,
    /// Ring-based d-regular graph (d odd, self-loop included).
    RingRegular(usize),
}

impl TopologySpec {
    /// Builds the consensus matrix for a network of `nodes` nodes.
    pub fn build(&self, nodes: usize) -> Result<ConsensusMatrix> {
        match self {
            TopologySpec::Complete => build_complete(nodes),
            TopologySpec::RingRegular(d) => build_d_regular(nodes, *d),
        }
    }
}

/// Solver selection plus its hyperparameters.
///
/// Baseline solvers carry `lambda` and `tau` because those two fix the
/// pooled objective they are scored on (the l1 weight is
/// `2 lambda / tau`); comparisons across solvers must keep the
/// `lambda / tau` ratio matched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverSpec {
    /// Distributed iterative shrinkage with consensus mixing.
    Dista { q: f64, alpha: f64, tau: f64 },
    /// Centralized baseline on the stacked measurements; its estimate
    /// is replicated across nodes for scoring.
    Ista { lambda: f64, tau: f64 },
    /// Distributed subgradient baseline with constant stepsize.
    Dsm { gamma: f64, lambda: f64, tau: f64 },
    /// Consensus ADMM with penalty `rho`.
    ConsensusAdmm { rho: f64, lambda: f64, tau: f64 },
}

impl SolverSpec {
    /// Stable lowercase label used in CSV output.
    pub fn label(&self) -> &'static str {
        match self {
            SolverSpec::Dista { .. } => "dista",
            SolverSpec::Ista { .. } => "ista",
            SolverSpec::Dsm { .. } => "dsm",
            SolverSpec::ConsensusAdmm { .. } => "admm",
        }
    }
}

/// Everything one Monte Carlo trial needs.
#[derive(Debug, Clone)]
pub struct TrialConfig {
    /// Signal length.
    pub n: usize,
    /// Number of nonzeros in the ground truth.
    pub k: usize,
    /// Measurements per node.
    pub m: usize,
    /// Network size.
    pub nodes: usize,
    pub topology: TopologySpec,
    pub solver: SolverSpec,
    pub noise: TargetSnr,
    /// Master seed for the campaign this trial belongs to.
    pub seed: u64,
    pub term: TerminationCriteria,
}

impl TrialConfig {
    fn check(&self) -> Result<()> {
        if self.k > self.n {
            return Err(Error::InvalidParameter(format!(
                "sparsity {} exceeds signal length {}",
                self.k, self.n
            )));
        }
        if self.m == 0 || self.m >= self.n {
            return Err(Error::InvalidParameter(format!(
                "per-node measurement count must satisfy 1 <= m < n, got m={} n={}",
                self.m, self.n
            )));
        }
        if self.nodes == 0 {
            return Err(Error::InvalidParameter(
                "at least one node is required".into(),
            ));
        }
        self.term.validate()
    }
}

fn trial_rng(master: u64, counter: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master);
    rng.set_stream(counter);
    rng
}

/// A fully materialized random instance for one trial.
#[derive(Debug, Clone)]
pub struct TrialInstance {
    pub signal: SparseSignal,
    /// Sensing matrices with (possibly noisy) measurements attached.
    pub data: Vec<SensorData>,
    /// Empirical SNR of `data` (infinite for noise-free instances).
    pub snr_realized: f64,
}

/// Draws the instance for trial number `counter` of a campaign: the
/// signal, sensing, and noise seeds are split off the master seed's
/// stream for that counter, so the instance depends on nothing else.
pub fn build_instance(config: &TrialConfig, counter: u64) -> Result<TrialInstance> {
    config.check()?;
    let mut rng = trial_rng(config.seed, counter);
    let signal_seed = rng.next_u64();
    let sensing_seed = rng.next_u64();
    let noise_seed = rng.next_u64();

    let signal = generate_signal(config.n, config.k, signal_seed)?;
    let blank = generate_sensing(config.nodes, config.m, config.n, sensing_seed)?;
    let clean = blank
        .iter()
        .map(|d| d.with_measurements(d.a().dot(&signal.x0)))
        .collect::<Result<Vec<_>>>()?;
    let (data, snr_realized) = apply_noise(&clean, config.noise, noise_seed)?;
    Ok(TrialInstance {
        signal,
        data,
        snr_realized,
    })
}

/// Dispatches the configured solver on prepared data and returns its
/// full report. The centralized baseline runs on the stacked
/// measurements and reports a single-column estimate matrix.
pub fn run_solver(config: &TrialConfig, data: &[SensorData]) -> Result<SolverReport> {
    match config.solver {
        SolverSpec::Dista { q, alpha, tau } => {
            let p_mat = config.topology.build(config.nodes)?;
            let p = DistaParams::uniform(q, alpha, tau, config.nodes)?;
            dista_run(data, &p_mat, &p, &config.term)
        }
        SolverSpec::Ista { lambda, tau } => {
            let (a, y) = stack_sensors(data)?;
            let p = LassoParams::new(lambda, tau)?;
            ista_run(&a, &y, &p, &config.term)
        }
        SolverSpec::Dsm { gamma, lambda, tau } => {
            let p_mat = config.topology.build(config.nodes)?;
            let p = LassoParams::new(lambda, tau)?;
            dsm_run(data, &p_mat, gamma, &p, &config.term)
        }
        SolverSpec::ConsensusAdmm { rho, lambda, tau } => {
            let p_mat = config.topology.build(config.nodes)?;
            let p = LassoParams::new(lambda, tau)?;
            admm_run(data, &p_mat, rho, &p, &config.term)
        }
    }
}

/// Runs one seeded trial: draw signal and sensing matrices, measure,
/// add calibrated noise, solve, and score. `counter` is the trial's
/// global index within its campaign; together with the master seed it
/// fully determines the trial. The MSE formula averages over estimate
/// columns, so the centralized baseline's single column scores exactly
/// as if it were replicated across all nodes.
pub fn run_trial(config: &TrialConfig, counter: u64) -> Result<MetricSet> {
    let instance = build_instance(config, counter)?;
    let report = run_solver(config, &instance.data)?;
    evaluate(&report.estimates, &instance.signal.x0, instance.snr_realized)
}

/// A fallback score for trials whose solver run failed (for example a
/// stepsize rejected for a particular random draw): the estimate is
/// taken to be the all-zero initial state, which never counts as a
/// recovery for a nonzero signal.
fn zero_estimate_metrics(config: &TrialConfig, counter: u64) -> MetricSet {
    let mut rng = trial_rng(config.seed, counter);
    let signal_seed = rng.next_u64();
    let mse = match generate_signal(config.n, config.k, signal_seed) {
        Ok(signal) => signal.x0.iter().map(|v| v * v).sum::<f64>() / config.n as f64,
        Err(_) => f64::INFINITY,
    };
    MetricSet {
        mse,
        recovered: mse < RECOVERY_MSE_THRESHOLD,
        snr_realized: f64::NAN,
    }
}

fn run_trial_or_zero(config: &TrialConfig, counter: u64) -> MetricSet {
    run_trial(config, counter).unwrap_or_else(|_| zero_estimate_metrics(config, counter))
}

/// Empirical recovery rates over a grid of measurement counts and
/// network sizes.
#[derive(Debug, Clone)]
pub struct PhaseGridResult {
    pub m_values: Vec<usize>,
    pub node_values: Vec<usize>,
    /// Trials per cell.
    pub trials: usize,
    /// Row-major over `(m, nodes)`: `rates[i * node_values.len() + j]`
    /// is the rate for `m_values[i]` and `node_values[j]`.
    pub rates: Vec<f64>,
}

impl PhaseGridResult {
    /// Recovery rate for an exact `(m, nodes)` pair, if on the grid.
    pub fn rate_for(&self, m: usize, nodes: usize) -> Option<f64> {
        let i = self.m_values.iter().position(|&v| v == m)?;
        let j = self.node_values.iter().position(|&v| v == nodes)?;
        Some(self.rates[i * self.node_values.len() + j])
    }
}

/// Runs `trials` seeded trials for every `(m, nodes)` cell and reports
/// empirical recovery rates. Solver failures count as non-recovery;
/// they never abort the grid. Deterministic given the master seed in
/// `base`, independent of worker count.
pub fn phase_transition(
    base: &TrialConfig,
    m_values: &[usize],
    node_values: &[usize],
    trials: usize,
) -> Result<PhaseGridResult> {
    if trials == 0 {
        return Err(Error::InvalidParameter(
            "at least one trial per cell is required".into(),
        ));
    }
    if m_values.is_empty() || node_values.is_empty() {
        return Err(Error::InvalidParameter(
            "phase grid axes must be nonempty".into(),
        ));
    }
    let mut jobs = Vec::with_capacity(m_values.len() * node_values.len());
    for (ci, (&m, &nodes)) in m_values
        .iter()
        .flat_map(|m| node_values.iter().map(move |nodes| (m, nodes)))
        .enumerate()
    {
        let config = TrialConfig {
            m,
            nodes,
            ..base.clone()
        };
        config.check()?;
        jobs.push((ci, config));
    }
    let recovered: Vec<bool> = jobs
        .par_iter()
        .flat_map_iter(|(ci, config)| {
            (0..trials).map(move |t| {
                let counter = (*ci * trials + t) as u64;
                run_trial_or_zero(config, counter).recovered
            })
        })
        .collect();
    let rates = recovered
        .chunks(trials)
        .map(|cell| cell.iter().filter(|&&r| r).count() as f64 / trials as f64)
        .collect();
    Ok(PhaseGridResult {
        m_values: m_values.to_vec(),
        node_values: node_values.to_vec(),
        trials,
        rates,
    })
}

/// One solver arm of an SNR sweep: the labeled solver runs with its
/// own per-node measurement count.
#[derive(Debug, Clone, Copy)]
pub struct SweepArm {
    pub solver: SolverSpec,
    pub m: usize,
}

/// One row of the MSE-vs-SNR table.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrRow {
    pub solver: &'static str,
    pub m: usize,
    /// Requested SNR in dB; infinity denotes the noise-free flag.
    pub snr_db: f64,
    pub trials: usize,
    pub mean_mse: f64,
}

/// Mean MSE per `(solver, m, snr)` configuration.
#[derive(Debug, Clone)]
pub struct SnrSweepResult {
    pub rows: Vec<SnrRow>,
}

/// Runs `trials` seeded trials for every `(arm, snr)` pair and reports
/// the mean MSE. `snr_db` entries are in decibels; `f64::INFINITY`
/// requests the noise-free flag. Failure policy and determinism are as
/// in [`phase_transition`].
pub fn snr_sweep(
    base: &TrialConfig,
    snr_db: &[f64],
    arms: &[SweepArm],
    trials: usize,
) -> Result<SnrSweepResult> {
    if trials == 0 {
        return Err(Error::InvalidParameter(
            "at least one trial per configuration is required".into(),
        ));
    }
    if snr_db.is_empty() || arms.is_empty() {
        return Err(Error::InvalidParameter(
            "the sweep needs at least one SNR value and one solver arm".into(),
        ));
    }
    let mut jobs = Vec::with_capacity(arms.len() * snr_db.len());
    for (ci, (arm, &db)) in arms
        .iter()
        .flat_map(|arm| snr_db.iter().map(move |db| (arm, db)))
        .enumerate()
    {
        let config = TrialConfig {
            m: arm.m,
            solver: arm.solver,
            noise: TargetSnr::from_db(db),
            ..base.clone()
        };
        config.check()?;
        jobs.push((ci, arm.solver.label(), arm.m, db, config));
    }
    let mses: Vec<f64> = jobs
        .par_iter()
        .flat_map_iter(|(ci, _, _, _, config)| {
            (0..trials).map(move |t| {
                let counter = (*ci * trials + t) as u64;
                run_trial_or_zero(config, counter).mse
            })
        })
        .collect();
    let rows = jobs
        .iter()
        .zip(mses.chunks(trials))
        .map(|((_, label, m, db, _), cell)| SnrRow {
            solver: label,
            m: *m,
            snr_db: *db,
            trials,
            mean_mse: cell.iter().sum::<f64>() / trials as f64,
        })
        .collect();
    Ok(SnrSweepResult { rows })
}

/// Runs `f` on a dedicated rayon pool with `workers` threads; zero
/// keeps the ambient (global) pool. Campaign results do not depend on
/// this choice; only wall time does.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Renders the recovery grid as CSV (`m,nodes,trials,recovery_rate`),
/// rows in grid order with `m` as the outer axis.
pub fn render_phase_csv(grid: &PhaseGridResult) -> String {
    let mut out = String::from("m,nodes,trials,recovery_rate\n");
    for (i, &m) in grid.m_values.iter().enumerate() {
        for (j, &nodes) in grid.node_values.iter().enumerate() {
            let rate = grid.rates[i * grid.node_values.len() + j];
            out.push_str(&format!("{m},{nodes},{},{rate}\n", grid.trials));
        }
    }
    out
}

/// Renders the sweep table as CSV (`solver,m,snr_db,trials,mean_mse`).
pub fn render_snr_csv(sweep: &SnrSweepResult) -> String {
    let mut out = String::from("solver,m,snr_db,trials,mean_mse\n");
    for row in &sweep.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.solver, row.m, row.snr_db, row.trials, row.mean_mse
        ));
    }
    out
}

/// Renders a solver trace as CSV (`iter,objective,step_norm`), one row
/// per completed iteration starting at 1.
pub fn render_trace_csv(trace: &[crate::solvers::TraceRow]) -> String {
    let mut out = String::from("iter,objective,step_norm\n");
    for (i, row) in trace.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, row.objective, row.step_norm));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn replicate_columns(col: &Vector, nodes: usize) -> EstimateMatrix {
        let mut x = EstimateMatrix::zeros((col.len(), nodes));
        for v in 0..nodes {
            x.column_mut(v).assign(col);
        }
        x
    }

    fn small_dista_base() -> TrialConfig {
        TrialConfig {
            n: 30,
            k: 3,
            m: 10,
            nodes: 3,
            topology: TopologySpec::Complete,
            solver: SolverSpec::Dista {
                q: 0.5,
                alpha: 1e-4,
                tau: 0.05,
            },
            noise: TargetSnr::Infinite,
            seed: 7,
            term: TerminationCriteria {
                eps: 1e-7,
                max_iter: 5_000,
            },
        }
    }

    #[test]
    fn signals_are_sparse_and_deterministic() {
        let s1 = generate_signal(40, 5, 99).unwrap();
        let s2 = generate_signal(40, 5, 99).unwrap();
        assert_eq!(s1.x0, s2.x0);
        assert_eq!(s1.support, s2.support);
        assert_eq!(s1.support.len(), 5);
        assert_eq!(s1.x0.iter().filter(|&&v| v != 0.0).count(), 5);
        let mut sorted = s1.support.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted, s1.support);
        assert!(*s1.support.last().unwrap() < 40);

        let empty = generate_signal(12, 0, 1).unwrap();
        assert!(empty.x0.iter().all(|&v| v == 0.0));
        assert!(generate_signal(5, 6, 0).is_err());
    }

    #[test]
    fn signal_values_have_standard_moments() {
        let mut values = Vec::new();
        for seed in 0..20 {
            let s = generate_signal(10_000, 1_000, seed).unwrap();
            values.extend(s.support.iter().map(|&i| s.x0[i]));
        }
        let count = values.len() as f64;
        let mean = values.iter().sum::<f64>() / count;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
        assert!(mean.abs() < 0.05, "nonzero-value mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "nonzero-value variance {var}");
    }

    #[test]
    fn sensing_matrices_have_calibrated_variance() {
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let mut count = 0.0;
        for seed in 0..10 {
            for d in generate_sensing(4, 25, 30, seed).unwrap() {
                for &v in d.a() {
                    sum += v;
                    sum_sq += v * v;
                    count += 1.0;
                }
            }
        }
        let mean = sum / count;
        let var = sum_sq / count - mean * mean;
        assert!(mean.abs() < 0.05 / 5.0, "entry mean {mean}");
        assert!((var - 1.0 / 25.0).abs() < 0.05 / 25.0, "entry variance {var}");
    }

    #[test]
    fn sensing_columns_have_near_unit_norm_and_repeat_per_seed() {
        let a = generate_sensing(3, 50, 80, 5).unwrap();
        let b = generate_sensing(3, 50, 80, 5).unwrap();
        for (da, db) in a.iter().zip(&b) {
            assert_eq!(da.a(), db.a());
        }
        let mut total = 0.0;
        let mut cols = 0.0;
        for d in &a {
            for j in 0..d.signal_len() {
                total += d.a().column(j).iter().map(|v| v * v).sum::<f64>();
                cols += 1.0;
            }
        }
        let avg = total / cols;
        assert!((avg - 1.0).abs() < 0.05, "average column energy {avg}");
    }

    #[test]
    fn noise_calibration_hits_the_requested_snr() {
        let signal = generate_signal(60, 6, 11).unwrap();
        let data: Vec<SensorData> = generate_sensing(10, 20, 60, 12)
            .unwrap()
            .iter()
            .map(|d| d.with_measurements(d.a().dot(&signal.x0)).unwrap())
            .collect();
        let target = 100.0; // 20 dB
        let (noisy, realized) = apply_noise(&data, TargetSnr::Linear(target), 13).unwrap();
        assert!(
            (realized - target).abs() < 0.2 * target,
            "realized SNR {realized}"
        );
        let (again, realized_again) = apply_noise(&data, TargetSnr::Linear(target), 13).unwrap();
        assert_eq!(realized, realized_again);
        for (a, b) in noisy.iter().zip(&again) {
            assert_eq!(a.y(), b.y());
        }
    }

    #[test]
    fn infinite_snr_passes_measurements_through() {
        let signal = generate_signal(20, 2, 21).unwrap();
        let data: Vec<SensorData> = generate_sensing(2, 6, 20, 22)
            .unwrap()
            .iter()
            .map(|d| d.with_measurements(d.a().dot(&signal.x0)).unwrap())
            .collect();
        let (noisy, realized) = apply_noise(&data, TargetSnr::Infinite, 23).unwrap();
        assert!(realized.is_infinite());
        for (a, b) in noisy.iter().zip(&data) {
            assert_eq!(a.y(), b.y());
        }
        assert_eq!(TargetSnr::from_db(f64::INFINITY), TargetSnr::Infinite);
        assert_eq!(TargetSnr::from_db(20.0), TargetSnr::Linear(100.0));
    }

    #[test]
    fn finite_snr_needs_nonzero_measurements() {
        let data = generate_sensing(2, 6, 20, 30).unwrap();
        assert!(apply_noise(&data, TargetSnr::Linear(10.0), 31).is_err());
        assert!(apply_noise(&data, TargetSnr::Infinite, 31).is_ok());
    }

    #[test]
    fn evaluation_matches_the_formula() {
        let signal = generate_signal(25, 4, 40).unwrap();
        let exact = replicate_columns(&signal.x0, 3);
        let perfect = evaluate(&exact, &signal.x0, f64::INFINITY).unwrap();
        assert_eq!(perfect.mse, 0.0);
        assert!(perfect.recovered);

        let zero = EstimateMatrix::zeros((25, 3));
        let miss = evaluate(&zero, &signal.x0, f64::INFINITY).unwrap();
        let energy = signal.x0.iter().map(|v| v * v).sum::<f64>();
        assert!((miss.mse - energy / 25.0).abs() < 1e-15);

        let mut off = exact.clone();
        off[[7, 1]] += 3e-2;
        let scored = evaluate(&off, &signal.x0, f64::INFINITY).unwrap();
        assert!((scored.mse - 9e-4 / 75.0).abs() < 1e-18);
        assert!(scored.recovered == (scored.mse < RECOVERY_MSE_THRESHOLD));
    }

    #[test]
    fn trials_are_reproducible_per_counter() {
        let config = small_dista_base();
        let a = run_trial(&config, 3).unwrap();
        let b = run_trial(&config, 3).unwrap();
        assert_eq!(a.mse.to_bits(), b.mse.to_bits());
        let c = run_trial(&config, 4).unwrap();
        assert_ne!(a.mse.to_bits(), c.mse.to_bits());
    }

    #[test]
    fn zero_sparsity_grid_recovers_everywhere() {
        let base = TrialConfig {
            k: 0,
            ..small_dista_base()
        };
        let grid = phase_transition(&base, &[6, 10], &[2, 3], 3).unwrap();
        assert_eq!(grid.rates.len(), 4);
        assert!(grid.rates.iter().all(|&r| r == 1.0));
        assert_eq!(grid.rate_for(6, 3), Some(1.0));
        assert_eq!(grid.rate_for(7, 3), None);
    }

    #[test]
    fn campaign_output_is_identical_across_worker_counts() {
        let base = small_dista_base();
        let render = || {
            let grid = phase_transition(&base, &[6, 12], &[3], 4).unwrap();
            render_phase_csv(&grid)
        };
        let one = with_workers(1, render).unwrap();
        let three = with_workers(3, render).unwrap();
        assert_eq!(one, three);
        assert_eq!(one.lines().count(), 3);
        assert!(one.starts_with("m,nodes,trials,recovery_rate\n"));
    }

    #[test]
    fn snr_sweep_reports_arms_in_order_and_noise_free_matches_the_grid() {
        let base = small_dista_base();
        let arms = [
            SweepArm {
                solver: base.solver,
                m: 12,
            },
            SweepArm {
                solver: SolverSpec::Dsm {
                    gamma: 1e-3,
                    lambda: 1e-4,
                    tau: 0.05,
                },
                m: 12,
            },
        ];
        let sweep = snr_sweep(&base, &[f64::INFINITY], &arms, 4).unwrap();
        assert_eq!(sweep.rows.len(), 2);
        assert_eq!(sweep.rows[0].solver, "dista");
        assert_eq!(sweep.rows[1].solver, "dsm");
        // Noise-free mean MSE of the shrinkage solver should sit below
        // the recovery threshold, consistent with a rate-1 grid cell.
        assert!(sweep.rows[0].mean_mse < RECOVERY_MSE_THRESHOLD);
        let grid = phase_transition(&base, &[12], &[3], 4).unwrap();
        assert_eq!(grid.rates, vec![1.0]);
    }

    #[test]
    fn more_noise_means_more_error() {
        let base = TrialConfig {
            term: TerminationCriteria {
                eps: 1e-7,
                max_iter: 3_000,
            },
            ..small_dista_base()
        };
        let arms = [SweepArm {
            solver: base.solver,
            m: 12,
        }];
        let sweep = snr_sweep(&base, &[10.0, 30.0], &arms, 6).unwrap();
        assert!(
            sweep.rows[0].mean_mse > sweep.rows[1].mean_mse,
            "10 dB mse {} vs 30 dB mse {}",
            sweep.rows[0].mean_mse,
            sweep.rows[1].mean_mse
        );
    }

    #[test]
    fn failed_trials_score_as_the_zero_estimate() {
        // tau far above any stability bound: every draw is rejected.
        let base = TrialConfig {
            solver: SolverSpec::Dista {
                q: 0.5,
                alpha: 1e-4,
                tau: 1e3,
            },
            ..small_dista_base()
        };
        let grid = phase_transition(&base, &[10], &[3], 4).unwrap();
        assert_eq!(grid.rates, vec![0.0]);
        assert!(run_trial(&base, 0).is_err());
    }

    #[test]
    fn csv_rendering_is_stable() {
        let grid = PhaseGridResult {
            m_values: vec![4, 10],
            node_values: vec![10],
            trials: 20,
            rates: vec![0.05, 0.95],
        };
        assert_eq!(
            render_phase_csv(&grid),
            "m,nodes,trials,recovery_rate\n4,10,20,0.05\n10,10,20,0.95\n"
        );
        let sweep = SnrSweepResult {
            rows: vec![SnrRow {
                solver: "dista",
                m: 8,
                snr_db: 30.0,
                trials: 20,
                mean_mse: 0.000125,
            }],
        };
        assert_eq!(
            render_snr_csv(&sweep),
            "solver,m,snr_db,trials,mean_mse\ndista,8,30,20,0.000125\n"
        );
        let trace = vec![
            crate::solvers::TraceRow {
                objective: 2.5,
                step_norm: 0.125,
            },
            crate::solvers::TraceRow {
                objective: 1.25,
                step_norm: 0.0625,
            },
        ];
        assert_eq!(
            render_trace_csv(&trace),
            "iter,objective,step_norm\n1,2.5,0.125\n2,1.25,0.0625\n"
        );
    }
}
