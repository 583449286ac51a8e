//! Experiment configuration files and their resolution into runnable parts.
//!
//! Configs are TOML key-value files with four small sections; every field
//! has a default, and the benchmark problem is the default problem, so an
//! empty file is a valid experiment. Command-line flags override file
//! values. The full schema is documented in the repository README.

use std::path::Path;

use serde::Deserialize;

use crate::baselines::BaselineParams;
use crate::dynamics::LocalPair;
use crate::error::{Error, Result};
use crate::hyperparams::{select_params, HyperParams};
use crate::network::{Schedule, SplitMix64};
use crate::problem::{BoxInterval, SeparableProblem};
use crate::runtime::{Algo, AlgoParams};

/// Printed benchmark parameters, kept verbatim: step size, momentum, and
/// the dominance margin they were derived from. Under this margin the
/// momentum sits just past its open bound, so these runs carry no
/// contraction certificate.
pub const PAPER_GAMMA: f64 = 0.345;
pub const PAPER_LAMBDA: f64 = 0.058;
pub const PAPER_MU: f64 = 0.3;

/// Parameter selection mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamMode {
    /// Derive everything from the implemented objective's certificate.
    Formula,
    /// Use the printed values γ = 0.345, λ = 0.058, μ = 0.3 verbatim.
    Paper,
    /// Explicit γ and λ from the config, certified against the formula-mode
    /// certificate.
    Explicit,
}

impl std::str::FromStr for ParamMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "formula" => Ok(ParamMode::Formula),
            "paper" => Ok(ParamMode::Paper),
            "explicit" => Ok(ParamMode::Explicit),
            other => Err(Error::InvalidConfig(format!(
                "unknown parameter mode {other:?} (expected formula, paper, or explicit)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// `"paper"` selects the built-in benchmark.
    pub benchmark: Option<String>,
    pub n: Option<usize>,
    /// Row-major symmetric matrix, `n*n` entries.
    pub q_matrix: Option<Vec<f64>>,
    pub q_vector: Option<Vec<f64>>,
    pub constant: Option<f64>,
    pub boxes_lo: Option<Vec<f64>>,
    pub boxes_hi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub mode: Option<String>,
    pub gamma_frac: Option<f64>,
    pub lambda_frac: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    /// Baseline step size / momentum; default to the accelerated method's.
    pub baseline_gamma: Option<f64>,
    pub baseline_momentum: Option<f64>,
}

/// Explicit reception ticks for one directed edge.
#[derive(Debug, Clone, Deserialize)]
pub struct ReceiveList {
    pub from: usize,
    pub to: usize,
    pub ticks: Vec<u64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    /// `"bernoulli"` (default) or `"explicit"`.
    pub mode: Option<String>,
    pub p: Option<f64>,
    pub seed: Option<u64>,
    pub horizon: Option<u64>,
    /// One draw per agent per tick gating compute and all receptions.
    pub tied: Option<bool>,
    /// Explicit mode: strictly increasing compute ticks, one list per agent.
    pub computes: Option<Vec<Vec<u64>>>,
    /// Explicit mode: reception ticks per directed edge.
    pub receive: Option<Vec<ReceiveList>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub algo: Option<String>,
    pub eps_stop: Option<f64>,
    /// `upper`, `lower`, `center`, or `random`.
    pub init: Option<String>,
    pub init_seed: Option<u64>,
    pub record_events: Option<bool>,
    /// Target accuracy the operation budget is quoted for.
    pub eps_budget: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub p_values: Option<Vec<f64>>,
    pub seed_base: Option<u64>,
    pub seed_count: Option<u64>,
    pub algos: Option<Vec<String>>,
    /// Probabilities whose per-tick distance curves are exported.
    pub fig_p: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

/// Raw experiment file.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Build the problem this config describes (default: benchmark, n = 10).
    pub fn build_problem(&self) -> Result<SeparableProblem> {
        let s = &self.problem;
        match s.benchmark.as_deref() {
            Some("paper") => SeparableProblem::make_paper_benchmark(s.n.unwrap_or(10)),
            Some(other) => Err(Error::InvalidConfig(format!(
                "unknown benchmark {other:?} (expected \"paper\")"
            ))),
            None => {
                if s.q_matrix.is_none() && s.n.is_none() {
                    // Nothing specified at all: the benchmark is the default.
                    return SeparableProblem::make_paper_benchmark(10);
                }
                let q_matrix = s.q_matrix.clone().ok_or_else(|| {
                    Error::InvalidConfig("inline problem needs q_matrix".into())
                })?;
                let lo = s.boxes_lo.clone().ok_or_else(|| {
                    Error::InvalidConfig("inline problem needs boxes_lo".into())
                })?;
                let hi = s.boxes_hi.clone().ok_or_else(|| {
                    Error::InvalidConfig("inline problem needs boxes_hi".into())
                })?;
                if lo.len() != hi.len() {
                    return Err(Error::InvalidConfig(
                        "boxes_lo and boxes_hi must have equal length".into(),
                    ));
                }
                let n = s.n.unwrap_or(lo.len());
                if n != lo.len() {
                    return Err(Error::InvalidConfig(format!(
                        "n = {n} disagrees with {} boxes",
                        lo.len()
                    )));
                }
                let boxes = lo
                    .iter()
                    .zip(&hi)
                    .map(|(&l, &h)| BoxInterval::new(l, h))
                    .collect::<Result<Vec<_>>>()?;
                let q_vector = s.q_vector.clone().unwrap_or_else(|| vec![0.0; n]);
                if q_vector.len() != n {
                    return Err(Error::InvalidConfig(format!(
                        "q_vector has {} entries, expected {n}",
                        q_vector.len()
                    )));
                }
                SeparableProblem::from_quadratic(
                    q_matrix,
                    q_vector,
                    s.constant.unwrap_or(0.0),
                    boxes,
                )
            }
        }
    }

    pub fn param_mode(&self) -> Result<ParamMode> {
        match self.params.mode.as_deref() {
            None => Ok(ParamMode::Formula),
            Some(s) => s.parse(),
        }
    }

    /// Resolve the accelerated method's parameters for this problem.
    ///
    /// Paper mode pins the printed values against the printed margin; they
    /// are reported as not strictly feasible and runs with them proceed
    /// with bound verification disabled.
    pub fn resolve_hyperparams(&self, p: &SeparableProblem) -> Result<ResolvedParams> {
        let cert = p.dominance_certificate();
        let mode = self.param_mode()?;
        let hp = match mode {
            ParamMode::Formula => {
                if !cert.valid {
                    return Err(Error::DominanceViolated { mu: cert.mu });
                }
                select_params(
                    &cert,
                    self.params.gamma_frac.unwrap_or(0.99),
                    self.params.lambda_frac.unwrap_or(0.9),
                )?
            }
            ParamMode::Paper => HyperParams {
                gamma: PAPER_GAMMA,
                lambda: PAPER_LAMBDA,
                mu: PAPER_MU,
                h_max: 1.0 / PAPER_GAMMA,
            },
            ParamMode::Explicit => {
                if !cert.valid {
                    return Err(Error::DominanceViolated { mu: cert.mu });
                }
                let gamma = self.params.gamma.ok_or_else(|| {
                    Error::InvalidConfig("explicit mode needs params.gamma".into())
                })?;
                let lambda = self.params.lambda.ok_or_else(|| {
                    Error::InvalidConfig("explicit mode needs params.lambda".into())
                })?;
                HyperParams {
                    gamma,
                    lambda,
                    mu: cert.mu,
                    h_max: cert.h_max,
                }
            }
        };
        let baseline = BaselineParams {
            gamma: self.params.baseline_gamma.unwrap_or(hp.gamma),
            momentum: self.params.baseline_momentum.unwrap_or(hp.lambda),
        };
        Ok(ResolvedParams { mode, hp, baseline })
    }

    /// Algorithm parameters for one algorithm under this config.
    pub fn algo_params(&self, p: &SeparableProblem, algo: Algo) -> Result<AlgoParams> {
        let resolved = self.resolve_hyperparams(p)?;
        Ok(resolved.for_algo(algo))
    }

    pub fn build_schedule(&self, p_override: Option<f64>, seed_override: Option<u64>) -> Result<Schedule> {
        let horizon = self.schedule.horizon.unwrap_or(100_000);
        match self.schedule.mode.as_deref().unwrap_or("bernoulli") {
            "bernoulli" => {
                let p = p_override.or(self.schedule.p).unwrap_or(1.0);
                let seed = seed_override.or(self.schedule.seed).unwrap_or(0);
                if self.schedule.tied.unwrap_or(false) {
                    Schedule::bernoulli_tied(p, seed, horizon)
                } else {
                    Schedule::bernoulli(p, seed, horizon)
                }
            }
            "explicit" => {
                if p_override.is_some() || seed_override.is_some() {
                    return Err(Error::InvalidConfig(
                        "p/seed overrides make no sense for an explicit schedule".into(),
                    ));
                }
                let computes = self.schedule.computes.clone().ok_or_else(|| {
                    Error::InvalidConfig("explicit schedule needs schedule.computes".into())
                })?;
                let receives = self
                    .schedule
                    .receive
                    .clone()
                    .unwrap_or_default()
                    .into_iter()
                    .map(|r| ((r.from, r.to), r.ticks))
                    .collect();
                Schedule::explicit(computes, receives, horizon)
            }
            other => Err(Error::InvalidConfig(format!(
                "unknown schedule mode {other:?} (expected bernoulli or explicit)"
            ))),
        }
    }

    /// Shared initial pair for all agents.
    pub fn build_init(&self, p: &SeparableProblem) -> Result<LocalPair> {
        let kind = self.run.init.as_deref().unwrap_or("upper");
        let point = match kind {
            "upper" => p.boxes().iter().map(|b| b.hi).collect::<Vec<f64>>(),
            "lower" => p.boxes().iter().map(|b| b.lo).collect(),
            "center" => p.boxes().iter().map(|b| b.center()).collect(),
            "random" => {
                let mut rng = SplitMix64::new(self.run.init_seed.unwrap_or(0));
                p.boxes()
                    .iter()
                    .map(|b| b.lo + rng.next_f64() * b.width())
                    .collect()
            }
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown init {other:?} (expected upper, lower, center, or random)"
                )))
            }
        };
        Ok(LocalPair::from_point(point))
    }

    pub fn eps_stop(&self) -> f64 {
        self.run.eps_stop.unwrap_or(1e-4)
    }

    pub fn eps_budget(&self) -> f64 {
        self.run.eps_budget.unwrap_or(1e-3)
    }

    pub fn sweep_p_values(&self) -> Vec<f64> {
        self.sweep
            .p_values
            .clone()
            .unwrap_or_else(|| (1..=10).map(|i| i as f64 / 10.0).collect())
    }

    pub fn sweep_seeds(&self) -> Vec<u64> {
        let base = self.sweep.seed_base.unwrap_or(0);
        let count = self.sweep.seed_count.unwrap_or(100);
        (base..base + count).collect()
    }

    pub fn sweep_algos(&self) -> Result<Vec<Algo>> {
        match &self.sweep.algos {
            None => Ok(vec![Algo::Nag, Algo::HeavyBall, Algo::Gd]),
            Some(list) => {
                if list.is_empty() {
                    return Err(Error::InvalidConfig(
                        "sweep.algos must not be empty".into(),
                    ));
                }
                list.iter().map(|s| s.parse()).collect()
            }
        }
    }

    /// Probabilities whose per-tick distance curves are exported by sweeps.
    pub fn fig_p_values(&self) -> Vec<f64> {
        self.sweep
            .fig_p
            .clone()
            .unwrap_or_else(|| vec![0.1, 0.5, 1.0])
    }
}

/// Resolved parameter set for one experiment.
#[derive(Debug, Clone, Copy)]
pub struct ResolvedParams {
    pub mode: ParamMode,
    pub hp: HyperParams,
    pub baseline: BaselineParams,
}

impl ResolvedParams {
    pub fn for_algo(&self, algo: Algo) -> AlgoParams {
        match algo {
            Algo::Nag => AlgoParams::Nag {
                hp: self.hp,
                // Paper-mode parameters sit outside the admissible region;
                // those runs are allowed and flagged instead of rejected.
                allow_infeasible: self.mode == ParamMode::Paper,
            },
            Algo::HeavyBall => AlgoParams::HeavyBall(self.baseline),
            Algo::Gd => AlgoParams::Gd(self.baseline),
        }
    }

    /// Contraction-bound verification is only meaningful with strictly
    /// admissible parameters.
    pub fn verification_enabled(&self) -> bool {
        self.hp.strictly_feasible()
    }
}
