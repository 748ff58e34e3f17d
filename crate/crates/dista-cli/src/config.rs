//! TOML run configuration: schema, defaults, and conversion into the
//! library's trial types.
//!
//! Unknown keys anywhere in the document are rejected, so typos fail
//! loudly instead of silently running with defaults.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use dista_core::experiments::{SolverSpec, SweepArm, TargetSnr, TopologySpec, TrialConfig};
use dista_core::solvers::TerminationCriteria;

/// Default shrinkage threshold, shared as the fallback `lambda` for
/// the baseline solvers.
pub const DEFAULT_ALPHA: f64 = 1e-4;
/// Default stepsize.
pub const DEFAULT_TAU: f64 = 0.02;
/// Default consensus/gradient mixing weight.
pub const DEFAULT_Q: f64 = 0.5;
/// Default subgradient stepsize.
pub const DEFAULT_GAMMA: f64 = 1e-3;
/// Default ADMM penalty.
pub const DEFAULT_RHO: f64 = 1.0;

/// Configuration problems detected before any computation starts.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

/// Top-level run configuration document.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; all randomness flows from it.
    pub seed: u64,
    /// Worker threads for campaigns; 0 or absent uses the default pool.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Trace output path for the single-solve command.
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub instance: InstanceSection,
    pub solver: SolverSection,
    #[serde(default)]
    pub termination: TerminationSection,
    #[serde(default)]
    pub phase: Option<PhaseSection>,
    #[serde(default)]
    pub snr: Option<SnrSection>,
}

/// `[instance]`: the generated problem.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSection {
    /// Signal length.
    pub n: usize,
    /// Nonzeros in the ground truth.
    pub k: usize,
    /// Measurements per node.
    pub m: usize,
    /// Network size.
    pub nodes: usize,
    /// "complete" or "ring-regular(d)" with odd d.
    #[serde(default = "default_topology")]
    pub topology: String,
    /// Measurement SNR in dB; absent means noise-free.
    #[serde(default)]
    pub snr_db: Option<f64>,
    /// Replace all measurements (and the ground truth) with zeros.
    #[serde(default)]
    pub zero_measurements: bool,
}

fn default_topology() -> String {
    "complete".into()
}

/// `[solver]` and `[[snr.arms]]`: solver kind plus hyperparameters.
/// Fields that do not apply to the chosen kind must stay unset.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// One of "dista", "ista", "dsm", "admm".
    pub kind: String,
    #[serde(default)]
    pub q: Option<f64>,
    /// Shrinkage threshold; also the default `lambda` for baselines.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    /// Per-node measurement count; only valid inside `[[snr.arms]]`.
    #[serde(default)]
    pub m: Option<usize>,
}

impl SolverSection {
    /// Resolves defaults and builds the solver spec. `arm` says whether
    /// this section is a sweep arm (where `m` is required) or the main
    /// `[solver]` table (where `m` is forbidden — set `[instance].m`).
    pub fn to_spec(&self, arm: bool) -> Result<SolverSpec> {
        if !arm && self.m.is_some() {
            return Err(ConfigError(
                "[solver].m is not a setting; the measurement count lives in [instance].m \
                 (per-arm m belongs to [[snr.arms]])"
                    .into(),
            ));
        }
        let alpha = self.alpha.unwrap_or(DEFAULT_ALPHA);
        let tau = self.tau.unwrap_or(DEFAULT_TAU);
        let lambda = self.lambda.unwrap_or(alpha);
        let foreign = |fields: &[(&str, bool)]| -> Result<()> {
            for (name, set) in fields {
                if *set {
                    return Err(ConfigError(format!(
                        "solver kind \"{}\" does not take `{name}`",
                        self.kind
                    )));
                }
            }
            Ok(())
        };
        match self.kind.as_str() {
            "dista" => {
                foreign(&[
                    ("lambda", self.lambda.is_some()),
                    ("gamma", self.gamma.is_some()),
                    ("rho", self.rho.is_some()),
                ])?;
                Ok(SolverSpec::Dista {
                    q: self.q.unwrap_or(DEFAULT_Q),
                    alpha,
                    tau,
                })
            }
            "ista" => {
                foreign(&[
                    ("q", self.q.is_some()),
                    ("gamma", self.gamma.is_some()),
                    ("rho", self.rho.is_some()),
                ])?;
                Ok(SolverSpec::Ista { lambda, tau })
            }
            "dsm" => {
                foreign(&[("q", self.q.is_some()), ("rho", self.rho.is_some())])?;
                Ok(SolverSpec::Dsm {
                    gamma: self.gamma.unwrap_or(DEFAULT_GAMMA),
                    lambda,
                    tau,
                })
            }
            "admm" => {
                foreign(&[("q", self.q.is_some()), ("gamma", self.gamma.is_some())])?;
                Ok(SolverSpec::ConsensusAdmm {
                    rho: self.rho.unwrap_or(DEFAULT_RHO),
                    lambda,
                    tau,
                })
            }
            other => Err(ConfigError(format!(
                "unknown solver kind \"{other}\" (expected dista, ista, dsm, or admm)"
            ))),
        }
    }

    /// Builds a sweep arm; `m` is required here.
    pub fn to_arm(&self) -> Result<SweepArm> {
        let m = self.m.ok_or_else(|| {
            ConfigError(format!(
                "sweep arm \"{}\" needs an `m` (measurements per node)",
                self.kind
            ))
        })?;
        Ok(SweepArm {
            solver: self.to_spec(true)?,
            m,
        })
    }
}

/// `[termination]`: stopping rule, both fields optional.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminationSection {
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
}

impl Default for TerminationSection {
    fn default() -> Self {
        TerminationSection {
            eps: None,
            max_iter: None,
        }
    }
}

impl TerminationSection {
    pub fn criteria(&self) -> TerminationCriteria {
        let defaults = TerminationCriteria::default();
        TerminationCriteria {
            eps: self.eps.unwrap_or(defaults.eps),
            max_iter: self.max_iter.unwrap_or(defaults.max_iter),
        }
    }
}

/// `[phase]`: recovery-probability grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSection {
    pub m_values: Vec<usize>,
    pub node_values: Vec<usize>,
    pub trials: usize,
    pub output: PathBuf,
}

/// `[snr]`: MSE-vs-SNR sweep. `snr_db` entries may be `inf` for the
/// noise-free flag.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnrSection {
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub output: PathBuf,
    pub arms: Vec<SolverSection>,
}

/// Parses "complete" or "ring-regular(d)".
pub fn parse_topology(s: &str) -> Result<TopologySpec> {
    if s == "complete" {
        return Ok(TopologySpec::Complete);
    }
    if let Some(d) = s
        .strip_prefix("ring-regular(")
        .and_then(|rest| rest.strip_suffix(')'))
    {
        let d: usize = d.trim().parse().map_err(|_| {
            ConfigError(format!("cannot parse degree in topology \"{s}\""))
        })?;
        return Ok(TopologySpec::RingRegular(d));
    }
    Err(ConfigError(format!(
        "unknown topology \"{s}\" (expected \"complete\" or \"ring-regular(d)\")"
    )))
}

impl RunConfig {
    /// Reads and schema-checks a configuration file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError(format!("cannot read config {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| ConfigError(format!("invalid config {}: {e}", path.display())))
    }

    /// Assembles the trial description shared by all commands. The
    /// zero-measurement flag is handled by the commands themselves.
    pub fn base_trial(&self) -> Result<TrialConfig> {
        let noise = match self.instance.snr_db {
            None => TargetSnr::Infinite,
            Some(db) => TargetSnr::from_db(db),
        };
        Ok(TrialConfig {
            n: self.instance.n,
            k: self.instance.k,
            m: self.instance.m,
            nodes: self.instance.nodes,
            topology: parse_topology(&self.instance.topology)?,
            solver: self.solver.to_spec(false)?,
            noise,
            seed: self.seed,
            term: self.termination.criteria(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        seed = 7
        [instance]
        n = 30
        k = 3
        m = 10
        nodes = 3
        [solver]
        kind = "dista"
    "#;

    #[test]
    fn minimal_document_gets_defaults() {
        let config: RunConfig = toml::from_str(MINIMAL).unwrap();
        let base = config.base_trial().unwrap();
        assert_eq!(base.seed, 7);
        assert_eq!(base.topology, TopologySpec::Complete);
        assert_eq!(base.noise, TargetSnr::Infinite);
        assert_eq!(
            base.solver,
            SolverSpec::Dista {
                q: DEFAULT_Q,
                alpha: DEFAULT_ALPHA,
                tau: DEFAULT_TAU
            }
        );
        let defaults = TerminationCriteria::default();
        assert_eq!(base.term.eps, defaults.eps);
        assert_eq!(base.term.max_iter, defaults.max_iter);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let doc = MINIMAL.replace("kind = \"dista\"", "kind = \"dista\"\nqq = 0.5");
        let err = toml::from_str::<RunConfig>(&doc).unwrap_err();
        assert!(err.to_string().contains("qq"), "{err}");
    }

    #[test]
    fn baselines_default_lambda_to_alpha() {
        let doc = MINIMAL.replace(
            "kind = \"dista\"",
            "kind = \"admm\"\nalpha = 0.002\nrho = 2.0",
        );
        let config: RunConfig = toml::from_str(&doc).unwrap();
        assert_eq!(
            config.base_trial().unwrap().solver,
            SolverSpec::ConsensusAdmm {
                rho: 2.0,
                lambda: 0.002,
                tau: DEFAULT_TAU
            }
        );
    }

    #[test]
    fn foreign_solver_fields_are_rejected() {
        let doc = MINIMAL.replace("kind = \"dista\"", "kind = \"dista\"\nrho = 1.0");
        let config: RunConfig = toml::from_str(&doc).unwrap();
        let err = config.base_trial().unwrap_err();
        assert!(err.to_string().contains("rho"), "{err}");

        let doc = MINIMAL.replace("kind = \"dista\"", "kind = \"ista\"\nq = 0.5");
        let config: RunConfig = toml::from_str(&doc).unwrap();
        assert!(config.base_trial().is_err());
    }

    #[test]
    fn main_solver_table_refuses_per_arm_m() {
        let doc = MINIMAL.replace("kind = \"dista\"", "kind = \"dista\"\nm = 8");
        let config: RunConfig = toml::from_str(&doc).unwrap();
        let err = config.base_trial().unwrap_err();
        assert!(err.to_string().contains("[instance].m"), "{err}");
    }

    #[test]
    fn topology_strings_parse() {
        assert_eq!(parse_topology("complete").unwrap(), TopologySpec::Complete);
        assert_eq!(
            parse_topology("ring-regular(5)").unwrap(),
            TopologySpec::RingRegular(5)
        );
        assert!(parse_topology("torus").is_err());
        assert!(parse_topology("ring-regular(x)").is_err());
    }

    #[test]
    fn sweep_sections_parse_with_arms() {
        let doc = format!(
            "{MINIMAL}
            [snr]
            snr_db = [10.0, 30.0, inf]
            trials = 4
            output = \"sweep.csv\"
            [[snr.arms]]
            kind = \"dista\"
            m = 8
            [[snr.arms]]
            kind = \"dsm\"
            m = 12
            gamma = 0.002
            "
        );
        let config: RunConfig = toml::from_str(&doc).unwrap();
        let snr = config.snr.as_ref().unwrap();
        assert!(snr.snr_db[2].is_infinite());
        let arms: Vec<SweepArm> = snr.arms.iter().map(|a| a.to_arm().unwrap()).collect();
        assert_eq!(arms[0].m, 8);
        assert_eq!(arms[0].solver.label(), "dista");
        assert_eq!(
            arms[1].solver,
            SolverSpec::Dsm {
                gamma: 0.002,
                lambda: DEFAULT_ALPHA,
                tau: DEFAULT_TAU
            }
        );
        // An arm without m is a configuration error.
        let missing = SolverSection {
            kind: "dista".into(),
            q: None,
            alpha: None,
            tau: None,
            lambda: None,
            gamma: None,
            rho: None,
            m: None,
        };
        assert!(missing.to_arm().is_err());
    }
}
