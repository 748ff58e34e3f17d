//! The four subcommands. Each one renders its full output in memory
//! and writes it with a single call, so a failed run never leaves a
//! partial file behind.

use std::fmt;
use std::path::{Path, PathBuf};

use dista_core::experiments::{
    build_instance, evaluate, phase_transition, render_phase_csv, render_snr_csv,
    render_trace_csv, run_solver, snr_sweep, with_workers, SweepArm, TargetSnr, TrialConfig,
    TrialInstance,
};
use dista_core::graph::ConsensusMatrix;
use dista_core::numerics::{spectral_norm, Vector};
use dista_core::solvers::{memory_footprint, FootprintSolver, TerminationReason};

use crate::config::{ConfigError, RunConfig};

/// Anything that stops a command; printed once by `main`.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(dista_core::Error),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<dista_core::Error> for CliError {
    fn from(e: dista_core::Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn termination_name(reason: &TerminationReason) -> &'static str {
    match reason {
        TerminationReason::Converged => "converged",
        TerminationReason::MaxIterations => "max-iterations",
    }
}

/// Builds the instance for trial 0 of the configured campaign. With
/// the zero-measurement flag the field is silent: every `y_v` and the
/// ground truth are zeroed (noise is skipped — there is no energy to
/// calibrate it against).
fn materialize(
    config: &RunConfig,
) -> Result<(TrialConfig, TrialInstance)> {
    let mut base = config.base_trial()?;
    if config.instance.zero_measurements {
        base.noise = TargetSnr::Infinite;
    }
    let mut instance = build_instance(&base, 0)?;
    if config.instance.zero_measurements {
        instance.signal.x0.fill(0.0);
        instance.signal.support.clear();
        instance.data = instance
            .data
            .iter()
            .map(|d| d.with_measurements(Vector::zeros(d.measurement_count())))
            .collect::<dista_core::Result<_>>()?;
    }
    Ok((base, instance))
}

/// Runs the configured solver on one generated instance, writes the
/// iteration trace as CSV, and prints a summary line.
pub fn cmd_solve(config: &RunConfig, output: Option<PathBuf>) -> Result<()> {
    let (base, instance) = materialize(config)?;
    let report = run_solver(&base, &instance.data)?;
    let metrics = evaluate(&report.estimates, &instance.signal.x0, instance.snr_realized)?;

    let path = output
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("trace.csv"));
    write_file(&path, &render_trace_csv(&report.trace))?;

    println!(
        "solver={} n={} k={} m={} nodes={} seed={}",
        base.solver.label(),
        base.n,
        base.k,
        base.m,
        base.nodes,
        base.seed
    );
    println!(
        "recovered={} mse={:e} fixed_point_residual={:e} iterations={} termination={} snr_realized={:e}",
        metrics.recovered,
        metrics.mse,
        report.fixed_point_residual,
        report.iterations,
        termination_name(&report.termination),
        metrics.snr_realized
    );
    println!("wrote {} ({} rows)", path.display(), report.trace.len());
    Ok(())
}

/// Runs the recovery-probability grid and writes it as CSV.
pub fn cmd_phase(config: &RunConfig, workers: usize, output: Option<PathBuf>) -> Result<()> {
    let section = config.phase.as_ref().ok_or_else(|| {
        CliError::Config("the phase command needs a [phase] section".into())
    })?;
    let base = config.base_trial()?;
    let grid = with_workers(workers, || {
        phase_transition(&base, &section.m_values, &section.node_values, section.trials)
    })??;
    let path = output.unwrap_or_else(|| section.output.clone());
    write_file(&path, &render_phase_csv(&grid))?;
    println!(
        "wrote {} ({} cells, {} trials each)",
        path.display(),
        grid.rates.len(),
        grid.trials
    );
    Ok(())
}

/// Runs the MSE-vs-SNR sweep and writes it as CSV.
pub fn cmd_snr(config: &RunConfig, workers: usize, output: Option<PathBuf>) -> Result<()> {
    let section = config.snr.as_ref().ok_or_else(|| {
        CliError::Config("the snr command needs an [snr] section".into())
    })?;
    let arms = section
        .arms
        .iter()
        .map(|a| a.to_arm().map_err(CliError::from))
        .collect::<Result<Vec<SweepArm>>>()?;
    let base = config.base_trial()?;
    let sweep = with_workers(workers, || {
        snr_sweep(&base, &section.snr_db, &arms, section.trials)
    })??;
    let path = output.unwrap_or_else(|| section.output.clone());
    write_file(&path, &render_snr_csv(&sweep))?;
    println!(
        "wrote {} ({} configurations, {} trials each)",
        path.display(),
        sweep.rows.len(),
        section.trials
    );
    Ok(())
}

fn solver_tau(base: &TrialConfig) -> f64 {
    use dista_core::experiments::SolverSpec::*;
    match base.solver {
        Dista { tau, .. } | Ista { tau, .. } | Dsm { tau, .. } | ConsensusAdmm { tau, .. } => tau,
    }
}

/// Checks the generated instance and network: per-node spectral norms
/// against the stepsize, consensus-matrix structure, and per-node
/// memory footprints. Findings are reported, never fatal.
pub fn cmd_validate(config: &RunConfig, perturb_consensus: Option<f64>) -> Result<()> {
    let (base, instance) = materialize(config)?;
    println!(
        "instance: n={} k={} m={} nodes={} topology={} seed={}",
        base.n, base.k, base.m, base.nodes, config.instance.topology, base.seed
    );

    let tau = solver_tau(&base);
    let mut violations = 0;
    for d in &instance.data {
        let norm_sq = spectral_norm(d.a())?.powi(2);
        let bound = 1.0 / norm_sq;
        let ok = tau < bound;
        if !ok {
            violations += 1;
        }
        println!(
            "node {}: ||A||_2^2 = {:.6}, stepsize bound = {:.6}, tau = {} -> {}",
            d.id(),
            norm_sq,
            bound,
            tau,
            if ok { "ok" } else { "VIOLATION" }
        );
    }
    if violations > 0 {
        println!(
            "stepsize: {violations} node(s) violate tau < 1/||A||_2^2; \
             the shrinkage solvers will refuse this instance"
        );
    } else {
        println!("stepsize: ok on all nodes");
    }

    let p_mat = base.topology.build(base.nodes)?;
    let p_mat = match perturb_consensus {
        Some(delta) if base.nodes >= 2 => {
            let mut weights = p_mat.weights().clone();
            weights[[0, 1]] += delta;
            ConsensusMatrix::from_parts(weights, p_mat.topology().clone())
        }
        _ => p_mat,
    };
    let findings = p_mat.validate();
    if findings.is_empty() {
        println!("consensus: ok ({} nodes, row sums 1, symmetric)", base.nodes);
    } else {
        for finding in &findings {
            println!("consensus: FAIL - {finding}");
        }
    }

    println!(
        "footprint dista: {} values per node (n={}, m={})",
        memory_footprint(FootprintSolver::Dista, base.n, base.m),
        base.n,
        base.m
    );
    println!(
        "footprint admm: {} values per node (n={}, m={})",
        memory_footprint(FootprintSolver::ConsensusAdmm, base.n, base.m),
        base.n,
        base.m
    );
    Ok(())
}
