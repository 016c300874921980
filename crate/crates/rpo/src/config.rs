//! Experiment configuration files.
//!
//! Flat `key = value` text; `#` starts a comment line. Only `env` is
//! required. Recognised keys and their defaults:
//!
//! | key                    | default                                  |
//! |------------------------|------------------------------------------|
//! | `env`                  | (required) environment spec or preset    |
//! | `variant`              | `I` (also `II`..`V`, or `1`..`5`)        |
//! | `trials`               | `50`                                     |
//! | `rounds`               | `200`                                    |
//! | `samples_per_arm`      | `50`                                     |
//! | `step_size`            | `0.05`                                   |
//! | `step_schedule`        | `constant`, or `inverse_sqrt` (c / sqrt T)|
//! | `beta`                 | `0.1`, `0.3` for no-response bidders     |
//! | `r_init`               | `0.1`                                    |
//! | `r_min`, `r_max`       | `0.1`, `5.0`                             |
//! | `q`                    | `0.8`                                    |
//! | `q_candidates`         | unset; comma list enables adaptive `q`   |
//! | `demand_kind`          | `logistic`, `mlp` for empirical values   |
//! | `demand_steps`         | `500`                                    |
//! | `demand_step_size`     | `0.5` logistic, `0.05` mlp               |
//! | `revenue_eval_samples` | `10000`                                  |
//! | `norm_grid_step`       | `0.01`                                   |
//! | `norm_samples`         | `100000`                                 |
//! | `seed`                 | `0`                                      |

use std::path::Path;

use rpo_core::demand::{DemandKind, FitConfig};
use rpo_core::optimizer::{
    Domain, GradientMethod, OptimizerConfig, Perturbation, QuantileRule, StepSize,
};

use crate::env::Environment;
use crate::error::{io_err, HarnessError, Result};
use crate::formats::{parse_key_values, parse_value, Entry};

const KEYS: [&str; 20] = [
    "env",
    "variant",
    "trials",
    "rounds",
    "samples_per_arm",
    "step_size",
    "step_schedule",
    "beta",
    "r_init",
    "r_min",
    "r_max",
    "q",
    "q_candidates",
    "demand_kind",
    "demand_steps",
    "demand_step_size",
    "revenue_eval_samples",
    "norm_grid_step",
    "norm_samples",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: Environment,
    /// `seed` here is unused; trial streams derive from `master_seed`.
    pub optimizer: OptimizerConfig,
    pub trials: usize,
    pub revenue_eval_samples: usize,
    pub norm_grid_step: f64,
    pub norm_samples: usize,
    pub master_seed: u64,
    /// Adjustments made while resolving the configuration.
    pub notes: Vec<String>,
}

pub fn parse_variant(s: &str) -> Option<GradientMethod> {
    let upper = s.trim().to_ascii_uppercase();
    GradientMethod::ALL
        .into_iter()
        .find(|m| m.roman() == upper || m.variant().to_string() == upper)
}

impl ExperimentConfig {
    /// Default settings for an environment and variant.
    pub fn new(env: Environment, method: GradientMethod) -> Self {
        let mut cfg = Self::unresolved(env, method);
        cfg.apply_fallbacks();
        cfg
    }

    fn unresolved(env: Environment, method: GradientMethod) -> Self {
        let demand_kind = if env.empirical { DemandKind::Mlp } else { DemandKind::Logistic };
        let beta = if env.is_no_response() { 0.3 } else { 0.1 };
        ExperimentConfig {
            env,
            optimizer: OptimizerConfig {
                method,
                perturbation: Perturbation::Relative(beta),
                demand_kind,
                demand_fit: FitConfig::default_for(demand_kind),
                ..OptimizerConfig::default()
            },
            trials: 50,
            revenue_eval_samples: 10_000,
            norm_grid_step: 0.01,
            norm_samples: 100_000,
            master_seed: 0,
            notes: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let entries = parse_key_values(text, source_name)?;
        if let Some(e) = entries.iter().find(|e| !KEYS.contains(&e.key.as_str())) {
            return Err(crate::error::parse_err(source_name, e.line, format!("unknown key {:?}", e.key)));
        }
        let get = |key: &str| entries.iter().find(|e| e.key == key);
        let env_entry = get("env").ok_or_else(|| HarnessError::Config(format!("{source_name}: missing key \"env\"")))?;
        let env = Environment::parse(&env_entry.value)?;
        let method = match get("variant") {
            Some(e) => parse_variant(&e.value).ok_or_else(|| {
                crate::error::parse_err(source_name, e.line, format!("unknown variant {:?}", e.value))
            })?,
            None => GradientMethod::Naive,
        };
        let mut cfg = ExperimentConfig::unresolved(env, method);

        let num = |e: &Entry| -> Result<f64> { parse_value(e, source_name) };
        let count = |e: &Entry| -> Result<usize> { parse_value(e, source_name) };
        let o = &mut cfg.optimizer;
        if let Some(e) = get("trials") {
            cfg.trials = count(e)?;
        }
        if let Some(e) = get("rounds") {
            o.rounds = count(e)?;
        }
        if let Some(e) = get("samples_per_arm") {
            o.samples_per_arm = count(e)?;
        }
        let step = get("step_size").map(num).transpose()?.unwrap_or(0.05);
        o.step_size = match get("step_schedule").map(|e| (e, e.value.as_str())) {
            None | Some((_, "constant")) => StepSize::Constant(step),
            Some((_, "inverse_sqrt")) => StepSize::InverseSqrtRounds(step),
            Some((e, other)) => {
                return Err(crate::error::parse_err(source_name, e.line, format!("unknown step_schedule {other:?}")))
            }
        };
        if let Some(e) = get("beta") {
            o.perturbation = Perturbation::Relative(num(e)?);
        }
        if let Some(e) = get("r_init") {
            o.r_init = num(e)?;
        }
        let r_min = get("r_min").map(num).transpose()?.unwrap_or(o.domain.min);
        let r_max = get("r_max").map(num).transpose()?.unwrap_or(o.domain.max);
        o.domain = Domain { min: r_min, max: r_max };
        if let Some(e) = get("q") {
            o.quantile = QuantileRule::Fixed(num(e)?);
        }
        if let Some(e) = get("q_candidates") {
            let qs = e
                .value
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| crate::error::parse_err(source_name, e.line, "invalid q_candidates list"))?;
            o.quantile = QuantileRule::Adaptive(qs);
        }
        if let Some(e) = get("demand_kind") {
            o.demand_kind = match e.value.as_str() {
                "logistic" => DemandKind::Logistic,
                "mlp" => DemandKind::Mlp,
                other => {
                    return Err(crate::error::parse_err(source_name, e.line, format!("unknown demand_kind {other:?}")))
                }
            };
            o.demand_fit = FitConfig::default_for(o.demand_kind);
        }
        if let Some(e) = get("demand_steps") {
            o.demand_fit.steps = count(e)?;
        }
        if let Some(e) = get("demand_step_size") {
            o.demand_fit.step_size = num(e)?;
        }
        if let Some(e) = get("revenue_eval_samples") {
            cfg.revenue_eval_samples = count(e)?;
        }
        if let Some(e) = get("norm_grid_step") {
            cfg.norm_grid_step = num(e)?;
        }
        if let Some(e) = get("norm_samples") {
            cfg.norm_samples = count(e)?;
        }
        if let Some(e) = get("seed") {
            cfg.master_seed = parse_value(e, source_name)?;
        }
        cfg.apply_fallbacks();
        cfg.validate()?;
        Ok(cfg)
    }

    // Demand models learn Pr[bid >= r], which equals the demand curve only
    // for bidders who respond to the reserve.
    fn apply_fallbacks(&mut self) {
        if self.env.is_no_response() && self.optimizer.method.uses_model() {
            let fallback = match self.optimizer.method {
                GradientMethod::BidTruncModelDemand => GradientMethod::BidTruncNaiveDemand,
                _ => GradientMethod::QuantileTruncNaiveDemand,
            };
            self.notes.push(format!(
                "variant {} uses naive demand: demand models are not identified for non-responding bidders",
                self.optimizer.method.roman()
            ));
            self.optimizer.method = fallback;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be >= 1".into()));
        }
        if self.revenue_eval_samples < 2 {
            return Err(HarnessError::Config("revenue_eval_samples must be >= 2".into()));
        }
        if self.norm_samples < 2 {
            return Err(HarnessError::Config("norm_samples must be >= 2".into()));
        }
        if !(self.norm_grid_step > 0.0) {
            return Err(HarnessError::Config("norm_grid_step must be > 0".into()));
        }
        self.optimizer.validate()?;
        Ok(())
    }
}
