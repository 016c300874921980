//! Zeroth-order projected gradient ascent on the revenue curve.
//!
//! Each round prices `n` auctions at `(1 + beta) r` and `n` at `(1 - beta) r`,
//! turns the two bid arms into a slope estimate and takes a projected step.

use alloc::vec::Vec;

use rand::Rng;

use crate::demand::{fit, holdout_error, DemandKind, DemandModel, FitConfig, ObservationStore};
use crate::error::{Error, Result};
use crate::estimators::{
    bid_truncation_excess_gradient, compose_gradient, model_demand_gradient, naive_demand_gradient,
    naive_gradient, quantile_truncation_excess_gradient, select_quantile, BidBatch, DemandMethod,
    EstimatorKind, ExcessMethod, GradientEstimate,
};
use crate::market::BidSource;

/// Closed search interval `[min, max]` for the reserve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub min: f64,
    pub max: f64,
}

impl Domain {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && min > 0.0 && min <= max) {
            return Err(Error::InvalidParameter {
                name: "domain",
                value: min,
                expected: "0 < r_min <= r_max, both finite",
            });
        }
        Ok(Domain { min, max })
    }

    pub fn contains(&self, r: f64) -> bool {
        (self.min..=self.max).contains(&r)
    }
}

impl Default for Domain {
    fn default() -> Self {
        Domain { min: 0.1, max: 5.0 }
    }
}

pub fn project(x: f64, domain: &Domain) -> f64 {
    x.clamp(domain.min, domain.max)
}

/// `(project(r + alpha g) - r) / alpha`; equals `g` away from the boundary.
pub fn gradient_mapping(r: f64, g: f64, alpha: f64, domain: &Domain) -> f64 {
    (project(r + alpha * g, domain) - r) / alpha
}

/// How far the two probe reserves sit from the current reserve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    /// Probes at `(1 ± beta) r`.
    Relative(f64),
    /// Probes `delta` apart: `beta_t = delta / (2 r_t)`.
    Absolute(f64),
}

impl Perturbation {
    pub fn beta_at(&self, r: f64) -> f64 {
        match *self {
            Perturbation::Relative(beta) => beta,
            Perturbation::Absolute(delta) => delta / (2.0 * r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Constant(f64),
    /// `c / sqrt(T)` for a run of `T` rounds.
    InverseSqrtRounds(f64),
}

impl StepSize {
    pub fn alpha(&self, rounds: usize) -> f64 {
        match *self {
            StepSize::Constant(a) => a,
            StepSize::InverseSqrtRounds(c) => c / libm::sqrt(rounds.max(1) as f64),
        }
    }
}

/// The five estimator wirings, numbered I to V.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMethod {
    Naive,
    BidTruncNaiveDemand,
    QuantileTruncNaiveDemand,
    BidTruncModelDemand,
    QuantileTruncModelDemand,
}

impl GradientMethod {
    pub const ALL: [GradientMethod; 5] = [
        GradientMethod::Naive,
        GradientMethod::BidTruncNaiveDemand,
        GradientMethod::QuantileTruncNaiveDemand,
        GradientMethod::BidTruncModelDemand,
        GradientMethod::QuantileTruncModelDemand,
    ];

    /// Variant number, 1 to 5.
    pub fn variant(&self) -> u8 {
        match self {
            GradientMethod::Naive => 1,
            GradientMethod::BidTruncNaiveDemand => 2,
            GradientMethod::QuantileTruncNaiveDemand => 3,
            GradientMethod::BidTruncModelDemand => 4,
            GradientMethod::QuantileTruncModelDemand => 5,
        }
    }

    pub fn from_variant(v: u8) -> Option<Self> {
        GradientMethod::ALL.get((v as usize).wrapping_sub(1)).copied()
    }

    pub fn roman(&self) -> &'static str {
        ["I", "II", "III", "IV", "V"][self.variant() as usize - 1]
    }

    pub fn excess(&self) -> Option<ExcessMethodKind> {
        match self {
            GradientMethod::Naive => None,
            GradientMethod::BidTruncNaiveDemand | GradientMethod::BidTruncModelDemand => {
                Some(ExcessMethodKind::BidTruncation)
            }
            _ => Some(ExcessMethodKind::QuantileTruncation),
        }
    }

    pub fn demand(&self) -> Option<DemandMethod> {
        match self {
            GradientMethod::Naive => None,
            GradientMethod::BidTruncNaiveDemand | GradientMethod::QuantileTruncNaiveDemand => {
                Some(DemandMethod::Naive)
            }
            _ => Some(DemandMethod::Model),
        }
    }

    pub fn uses_quantile(&self) -> bool {
        self.excess() == Some(ExcessMethodKind::QuantileTruncation)
    }

    pub fn uses_model(&self) -> bool {
        self.demand() == Some(DemandMethod::Model)
    }
}

/// Excess estimator family, before a quantile is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExcessMethodKind {
    BidTruncation,
    QuantileTruncation,
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuantileRule {
    Fixed(f64),
    /// Re-select from these candidates on every batch.
    Adaptive(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub r_init: f64,
    pub rounds: usize,
    pub samples_per_arm: usize,
    pub step_size: StepSize,
    pub perturbation: Perturbation,
    pub domain: Domain,
    pub method: GradientMethod,
    pub quantile: QuantileRule,
    pub demand_kind: DemandKind,
    pub demand_fit: FitConfig,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            r_init: 0.1,
            rounds: 200,
            samples_per_arm: 50,
            step_size: StepSize::Constant(0.05),
            perturbation: Perturbation::Relative(0.1),
            domain: Domain::default(),
            method: GradientMethod::Naive,
            quantile: QuantileRule::Fixed(0.8),
            demand_kind: DemandKind::Logistic,
            demand_fit: FitConfig::default_for(DemandKind::Logistic),
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        Domain::new(self.domain.min, self.domain.max)?;
        if !self.domain.contains(self.r_init) {
            return Err(Error::InvalidParameter {
                name: "r_init",
                value: self.r_init,
                expected: "inside [r_min, r_max]",
            });
        }
        if self.samples_per_arm == 0 {
            return Err(Error::InvalidParameter { name: "samples_per_arm", value: 0.0, expected: ">= 1" });
        }
        let alpha = self.step_size.alpha(self.rounds);
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter { name: "step_size", value: alpha, expected: "finite and > 0" });
        }
        match self.perturbation {
            Perturbation::Relative(beta) if !(beta > 0.0 && beta < 1.0) => {
                return Err(Error::InvalidParameter { name: "beta", value: beta, expected: "in (0, 1)" });
            }
            // the widest relative perturbation occurs at r_min
            Perturbation::Absolute(delta) if !(delta > 0.0 && delta < 2.0 * self.domain.min) => {
                return Err(Error::InvalidParameter {
                    name: "delta",
                    value: delta,
                    expected: "in (0, 2 r_min)",
                });
            }
            _ => {}
        }
        if self.method.uses_quantile() {
            let qs: &[f64] = match &self.quantile {
                QuantileRule::Fixed(q) => core::slice::from_ref(q),
                QuantileRule::Adaptive(c) if c.is_empty() => return Err(Error::EmptyCandidates),
                QuantileRule::Adaptive(c) => c,
            };
            for &q in qs {
                if !(q > 0.0 && q <= 1.0) {
                    return Err(Error::InvalidParameter { name: "quantile", value: q, expected: "in (0, 1]" });
                }
                if libm::floor(q * self.samples_per_arm as f64) < 1.0 {
                    return Err(Error::QuantileKeepsNoSamples { q, n: self.samples_per_arm });
                }
            }
        }
        Ok(())
    }
}

/// Mutable state carried between rounds.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub reserve: f64,
    pub round: usize,
    pub store: ObservationStore,
    /// Demand model fitted on every round so far; `None` before the first fit.
    pub model: Option<DemandModel>,
}

impl OptimizerState {
    pub fn new(config: &OptimizerConfig) -> Self {
        OptimizerState { reserve: config.r_init, round: 0, store: ObservationStore::new(), model: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    pub reserve: f64,
    pub r_plus: f64,
    pub r_minus: f64,
    pub gradient: GradientEstimate,
    /// Quantile used by quantile truncation this round.
    pub quantile: Option<f64>,
    pub gradient_mapping: f64,
    pub r_next: f64,
    /// Error of the demand model used this round, measured on this round's
    /// (unseen) observations.
    pub demand_holdout_mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<RoundRecord>,
    pub config: OptimizerConfig,
    /// `None` for an empty run.
    pub min_gradient_mapping_sq: Option<f64>,
}

impl Trajectory {
    pub fn reserves(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.reserve)
    }

    pub fn final_reserve(&self) -> f64 {
        self.records.last().map_or(self.config.r_init, |r| r.r_next)
    }
}

/// Plays one round: probe both reserves, estimate the slope, step.
///
/// With a model-demand method the slope uses the model fitted on earlier
/// rounds only; this round's observations are recorded and the model
/// refitted afterwards. The very first round has no model and falls back to
/// the naive demand estimator.
pub fn run_round<S, R>(
    state: &mut OptimizerState,
    env: &S,
    config: &OptimizerConfig,
    rng: &mut R,
) -> Result<RoundRecord>
where
    S: BidSource + ?Sized,
    R: Rng + ?Sized,
{
    let r = state.reserve;
    let beta = config.perturbation.beta_at(r);
    let (r_plus, r_minus) = ((1.0 + beta) * r, (1.0 - beta) * r);
    let n = config.samples_per_arm;
    let plus = env.sample_bids(r_plus, n, rng);
    let minus = env.sample_bids(r_minus, n, rng);
    let batch = BidBatch::from_samples(r_plus, r_minus, &plus, &minus)?;

    let mut quantile = None;
    let mut holdout = None;
    let gradient = match config.method {
        GradientMethod::Naive => naive_gradient(&batch),
        method => {
            let (excess, excess_method) = match method.excess() {
                Some(ExcessMethodKind::BidTruncation) => {
                    (bid_truncation_excess_gradient(&batch), ExcessMethod::BidTruncation)
                }
                _ => {
                    let q = match &config.quantile {
                        QuantileRule::Fixed(q) => *q,
                        QuantileRule::Adaptive(candidates) => select_quantile(&batch, candidates)?,
                    };
                    quantile = Some(q);
                    (quantile_truncation_excess_gradient(&batch, q)?, ExcessMethod::QuantileTruncation { q })
                }
            };
            let (demand, demand_method) = match (&state.model, method.uses_model()) {
                (Some(model), true) => {
                    let mut fresh = ObservationStore::new();
                    fresh.record(&batch);
                    holdout = Some(holdout_error(model, fresh.as_slice())?);
                    (model_demand_gradient(model, r_plus, r_minus)?, DemandMethod::Model)
                }
                _ => (naive_demand_gradient(&batch), DemandMethod::Naive),
            };
            let kind = EstimatorKind::Decomposed { excess: Some(excess_method), demand: Some(demand_method) };
            compose_gradient(excess, demand)?.with_kind(kind, n)
        }
    };

    if config.method.uses_model() {
        state.store.record(&batch);
        state.model = Some(fit(&state.store, config.demand_kind, &config.demand_fit)?);
    }

    let alpha = config.step_size.alpha(config.rounds);
    let r_next = project(r + alpha * gradient.value, &config.domain);
    state.round += 1;
    state.reserve = r_next;
    Ok(RoundRecord {
        round: state.round,
        reserve: r,
        r_plus,
        r_minus,
        gradient,
        quantile,
        gradient_mapping: (r_next - r) / alpha,
        r_next,
        demand_holdout_mae: holdout,
    })
}

/// Runs the full loop on the stream derived from `config.seed`.
pub fn optimize<S: BidSource + ?Sized>(config: &OptimizerConfig, env: &S) -> Result<Trajectory> {
    let mut rng = crate::derive_stream(config.seed, 0);
    optimize_with_rng(config, env, &mut rng)
}

pub fn optimize_with_rng<S, R>(config: &OptimizerConfig, env: &S, rng: &mut R) -> Result<Trajectory>
where
    S: BidSource + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    let mut state = OptimizerState::new(config);
    let mut records = Vec::with_capacity(config.rounds);
    for _ in 0..config.rounds {
        records.push(run_round(&mut state, env, config, rng)?);
    }
    let min_gradient_mapping_sq = records
        .iter()
        .map(|r| r.gradient_mapping * r.gradient_mapping)
        .reduce(f64::min);
    Ok(Trajectory { records, config: config.clone(), min_gradient_mapping_sq })
}

/// Rounds, samples per arm and probe gap for a total sample budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub rounds: u64,
    pub samples_per_arm: u64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SchedulePreset {
    /// Naive estimator: `T = N^(1/2)`, `delta = c N^(-1/8)`.
    Cor1,
    /// Bid truncation with model demand: `T = N^(2/3)`, `delta = c sqrt(eps + eps_d)`.
    Cor2 { eps: f64, eps_demand: f64 },
    /// Quantile truncation with model demand: `T = N^(2/3)`, `delta = c sqrt(eps_d + 1 - q)`.
    Cor3 { eps_demand: f64, q: f64 },
}

fn isqrt(n: u128) -> u128 {
    let mut x = libm::sqrt(n as f64) as u128;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

fn icbrt(n: u128) -> u128 {
    let mut x = libm::cbrt(n as f64) as u128;
    while x * x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}

/// Splits `total` samples into rounds; `c` scales the probe gap.
pub fn corollary_schedule(total: u64, preset: SchedulePreset, c: f64) -> Result<Schedule> {
    if total < 4 {
        return Err(Error::SampleBudgetTooSmall(total));
    }
    let n = total as u128;
    let (rounds, delta) = match preset {
        SchedulePreset::Cor1 => (isqrt(n), c * libm::pow(total as f64, -0.125)),
        SchedulePreset::Cor2 { eps, eps_demand } => (icbrt(n * n), c * libm::sqrt(eps + eps_demand)),
        SchedulePreset::Cor3 { eps_demand, q } => (icbrt(n * n), c * libm::sqrt(eps_demand + 1.0 - q)),
    };
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter { name: "delta", value: delta, expected: "finite and > 0" });
    }
    let rounds = rounds as u64;
    Ok(Schedule { rounds, samples_per_arm: total / rounds, delta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{BidSample, Market};
    use alloc::vec;

    #[test]
    fn projection_examples() {
        let d = Domain::default();
        assert_eq!(project(0.05, &d), 0.1);
        assert_eq!(project(0.7, &d), 0.7);
        assert_eq!(project(6.2, &d), 5.0);
    }

    #[test]
    fn gradient_mapping_examples() {
        let d = Domain::default();
        assert!((gradient_mapping(0.5, 1.0, 0.05, &d) - 1.0).abs() < 1e-12);
        assert_eq!(gradient_mapping(0.1, -10.0, 0.05, &d), 0.0);
        assert!((gradient_mapping(4.99, 10.0, 0.05, &d) - 0.2).abs() < 1e-9);
    }

    struct Zero;

    impl BidSource for Zero {
        fn sample_bid<R: Rng + ?Sized>(&self, reserve: f64, _: &mut R) -> BidSample {
            BidSample::new(0.0, reserve)
        }
    }

    #[test]
    fn zero_environment_does_not_move() {
        let cfg = OptimizerConfig { r_init: 0.3, rounds: 5, ..Default::default() };
        let t = optimize(&cfg, &Zero).unwrap();
        for rec in &t.records {
            assert_eq!(rec.gradient.value, 0.0);
            assert_eq!(rec.r_next, 0.3);
        }
        assert_eq!(t.min_gradient_mapping_sq, Some(0.0));
    }

    #[test]
    fn empty_and_single_round_runs() {
        let env = Market::uniform_perfect(0.4).unwrap();
        let cfg = OptimizerConfig { rounds: 0, ..Default::default() };
        let t = optimize(&cfg, &env).unwrap();
        assert!(t.records.is_empty());
        assert_eq!(t.min_gradient_mapping_sq, None);

        let cfg = OptimizerConfig { rounds: 1, r_init: 0.3, seed: 9, ..Default::default() };
        let t = optimize(&cfg, &env).unwrap();
        let rec = &t.records[0];
        assert_eq!(rec.r_next, project(0.3 + 0.05 * rec.gradient.value, &cfg.domain));
        assert!((rec.r_plus - 0.33).abs() < 1e-12 && (rec.r_minus - 0.27).abs() < 1e-12);
    }

    #[test]
    fn first_model_round_falls_back_to_naive_demand() {
        let env = Market::uniform_perfect(0.4).unwrap();
        let cfg = OptimizerConfig { rounds: 3, method: GradientMethod::QuantileTruncModelDemand, ..Default::default() };
        let t = optimize(&cfg, &env).unwrap();
        let demand = |i: usize| match t.records[i].gradient.kind {
            EstimatorKind::Decomposed { demand, .. } => demand,
            _ => None,
        };
        assert_eq!(demand(0), Some(DemandMethod::Naive));
        assert_eq!(demand(1), Some(DemandMethod::Model));
        assert!(t.records[0].demand_holdout_mae.is_none());
        assert!(t.records[1].demand_holdout_mae.is_some());
        assert_eq!(t.records[1].quantile, Some(0.8));
    }

    #[test]
    fn variant_numbering_round_trips() {
        for m in GradientMethod::ALL {
            assert_eq!(GradientMethod::from_variant(m.variant()), Some(m));
        }
        assert_eq!(GradientMethod::from_variant(0), None);
        assert_eq!(GradientMethod::from_variant(6), None);
        assert_eq!(GradientMethod::QuantileTruncModelDemand.roman(), "V");
    }

    #[test]
    fn config_validation() {
        let ok = OptimizerConfig::default();
        assert!(ok.validate().is_ok());
        let bad = [
            OptimizerConfig { r_init: 0.05, ..ok.clone() },
            OptimizerConfig { samples_per_arm: 0, ..ok.clone() },
            OptimizerConfig { perturbation: Perturbation::Relative(1.0), ..ok.clone() },
            OptimizerConfig { step_size: StepSize::Constant(0.0), ..ok.clone() },
            OptimizerConfig {
                method: GradientMethod::QuantileTruncNaiveDemand,
                quantile: QuantileRule::Adaptive(vec![]),
                ..ok.clone()
            },
            OptimizerConfig {
                method: GradientMethod::QuantileTruncNaiveDemand,
                quantile: QuantileRule::Fixed(0.01),
                ..ok.clone()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn schedule_examples() {
        let s = corollary_schedule(10_000, SchedulePreset::Cor1, 1.0).unwrap();
        assert_eq!((s.rounds, s.samples_per_arm), (100, 100));
        assert!((s.delta - 0.316_227_766).abs() < 1e-6);
        let s = corollary_schedule(1_000_000, SchedulePreset::Cor2 { eps: 0.005, eps_demand: 0.005 }, 1.0).unwrap();
        assert_eq!((s.rounds, s.samples_per_arm), (10_000, 100));
        assert!((s.delta - 0.1).abs() < 1e-12);
        assert_eq!(corollary_schedule(3, SchedulePreset::Cor1, 1.0), Err(Error::SampleBudgetTooSmall(3)));
        let s = corollary_schedule(4, SchedulePreset::Cor3 { eps_demand: 0.0, q: 0.75 }, 1.0).unwrap();
        assert_eq!((s.rounds, s.samples_per_arm), (2, 2));
    }

    #[test]
    fn integer_roots_are_exact() {
        assert_eq!(isqrt(99), 9);
        assert_eq!(isqrt(100), 10);
        assert_eq!(icbrt(999_999), 99);
        assert_eq!(icbrt(1_000_000), 100);
        assert_eq!(icbrt(1_000_000_000_000), 10_000);
    }
}
