//! Parametric demand curves `f(r) ~ Pr[bid >= r]`.
//!
//! Models are refitted from scratch on every call to [`fit`], by full-batch
//! descent on the mean binary cross-entropy. Observations that share a
//! reserve are pooled into (count, cleared) groups first; the loss and its
//! gradient are unchanged by the pooling, only cheaper to evaluate.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::estimators::BidBatch;

/// Hidden units in the MLP demand model.
pub const HIDDEN_UNITS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandObservation {
    pub reserve: f64,
    pub cleared: bool,
}

/// Append-only log of demand observations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationStore {
    observations: Vec<DemandObservation>,
}

impl ObservationStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, obs: DemandObservation) {
        self.observations.push(obs);
    }

    /// Appends one observation per bid: the `r_plus` arm first, then `r_minus`.
    pub fn record(&mut self, batch: &BidBatch) {
        let arms = [(batch.r_plus(), batch.x_plus()), (batch.r_minus(), batch.x_minus())];
        for (reserve, bids) in arms {
            self.observations.extend(
                bids.iter().map(|&b| DemandObservation { reserve, cleared: b > 0.0 && b >= reserve }),
            );
        }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn as_slice(&self) -> &[DemandObservation] {
        &self.observations
    }
}

impl Extend<DemandObservation> for ObservationStore {
    fn extend<T: IntoIterator<Item = DemandObservation>>(&mut self, iter: T) {
        self.observations.extend(iter);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemandKind {
    Logistic,
    Mlp,
}

/// Training hyper-parameters. The step size halves whenever a step would
/// increase the loss (and that step is discarded).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub steps: usize,
    pub step_size: f64,
    pub seed: u64,
}

impl FitConfig {
    pub fn default_for(kind: DemandKind) -> Self {
        match kind {
            DemandKind::Logistic => FitConfig { steps: 500, step_size: 0.5, seed: 0 },
            DemandKind::Mlp => FitConfig { steps: 500, step_size: 0.05, seed: 0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub input_offset: f64,
    pub input_scale: f64,
    pub hidden_weights: [f64; HIDDEN_UNITS],
    pub hidden_biases: [f64; HIDDEN_UNITS],
    pub output_weights: [f64; HIDDEN_UNITS],
    pub output_bias: f64,
}

impl MlpParams {
    fn logit(&self, r: f64) -> f64 {
        let x = (r - self.input_offset) / self.input_scale;
        let mut z = self.output_bias;
        for j in 0..HIDDEN_UNITS {
            let h = (self.hidden_weights[j] * x + self.hidden_biases[j]).max(0.0);
            z += self.output_weights[j] * h;
        }
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DemandParams {
    /// Degenerate fit, or a fixed curve.
    Constant(f64),
    /// `sigmoid(intercept + slope * r)`.
    Logistic { intercept: f64, slope: f64 },
    Mlp(MlpParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandModel {
    kind: DemandKind,
    params: Option<DemandParams>,
    trained_on: usize,
}

impl DemandModel {
    pub fn untrained(kind: DemandKind) -> Self {
        DemandModel { kind, params: None, trained_on: 0 }
    }

    pub fn constant(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter { name: "demand", value: p, expected: "in [0, 1]" });
        }
        Ok(DemandModel { kind: DemandKind::Logistic, params: Some(DemandParams::Constant(p)), trained_on: 0 })
    }

    pub fn logistic(intercept: f64, slope: f64) -> Result<Self> {
        if !(intercept.is_finite() && slope.is_finite()) {
            return Err(Error::NonFinite("logistic parameter"));
        }
        Ok(DemandModel {
            kind: DemandKind::Logistic,
            params: Some(DemandParams::Logistic { intercept, slope }),
            trained_on: 0,
        })
    }

    /// Reassembles a model from stored parameters.
    pub fn from_parts(kind: DemandKind, params: DemandParams, trained_on: usize) -> Result<Self> {
        let finite = match &params {
            DemandParams::Constant(p) => (0.0..=1.0).contains(p),
            DemandParams::Logistic { intercept, slope } => intercept.is_finite() && slope.is_finite(),
            DemandParams::Mlp(m) => {
                m.input_offset.is_finite()
                    && m.input_scale.is_finite()
                    && m.input_scale != 0.0
                    && m.output_bias.is_finite()
                    && m.hidden_weights
                        .iter()
                        .chain(&m.hidden_biases)
                        .chain(&m.output_weights)
                        .all(|w| w.is_finite())
            }
        };
        if !finite {
            return Err(Error::NonFinite("demand model parameter"));
        }
        Ok(DemandModel { kind, params: Some(params), trained_on })
    }

    pub fn kind(&self) -> DemandKind {
        self.kind
    }

    pub fn params(&self) -> Option<&DemandParams> {
        self.params.as_ref()
    }

    pub fn trained_on(&self) -> usize {
        self.trained_on
    }

    pub fn is_fitted(&self) -> bool {
        self.params.is_some()
    }

    /// Predicted probability that the highest bid clears reserve `r`.
    pub fn predict(&self, r: f64) -> Result<f64> {
        let p = match self.params.as_ref().ok_or(Error::UnfittedModel)? {
            DemandParams::Constant(p) => *p,
            DemandParams::Logistic { intercept, slope } => sigmoid(intercept + slope * r),
            DemandParams::Mlp(m) => sigmoid(m.logit(r)),
        };
        Ok(p)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy)]
struct Group {
    x: f64,
    count: f64,
    cleared: f64,
}

struct Pooled {
    groups: Vec<Group>,
    total: f64,
    cleared: f64,
    offset: f64,
    scale: f64,
}

fn pool(observations: &[DemandObservation]) -> Pooled {
    let mut by_reserve: BTreeMap<u64, (f64, f64, f64)> = BTreeMap::new();
    for o in observations {
        let e = by_reserve.entry(o.reserve.to_bits()).or_insert((o.reserve, 0.0, 0.0));
        e.1 += 1.0;
        e.2 += o.cleared as u8 as f64;
    }
    let total = observations.len() as f64;
    let mean = by_reserve.values().map(|(r, n, _)| r * n).sum::<f64>() / total;
    let var = by_reserve.values().map(|(r, n, _)| n * (r - mean) * (r - mean)).sum::<f64>() / total;
    let scale = if var > 1e-24 { libm::sqrt(var) } else { 1.0 };
    let groups: Vec<Group> = by_reserve
        .values()
        .map(|&(r, count, cleared)| Group { x: (r - mean) / scale, count, cleared })
        .collect();
    let cleared = groups.iter().map(|g| g.cleared).sum();
    Pooled { groups, total, cleared, offset: mean, scale }
}

// Mean cross-entropy of a pooled group with logit z, and d(loss)/dz.
// softplus(z), softplus(-z) and sigmoid(z) share one exp and one log1p.
#[inline]
fn group_loss(g: &Group, z: f64) -> (f64, f64) {
    let e = libm::exp(-z.abs());
    let l1p = libm::log1p(e);
    let loss = g.cleared * ((-z).max(0.0) + l1p) + (g.count - g.cleared) * (z.max(0.0) + l1p);
    let p = if z >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    (loss, g.count * p - g.cleared)
}

/// A differentiable model over the standardised input.
trait Objective {
    fn loss_and_grad(&self, params: &[f64], grad: &mut [f64]) -> f64;
}

struct LogisticObjective<'a>(&'a Pooled);

impl Objective for LogisticObjective<'_> {
    fn loss_and_grad(&self, p: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let mut total = 0.0;
        for g in &self.0.groups {
            let (l, dz) = group_loss(g, p[0] + p[1] * g.x);
            total += l;
            grad[0] += dz;
            grad[1] += dz * g.x;
        }
        let n = self.0.total;
        grad.iter_mut().for_each(|d| *d /= n);
        total / n
    }
}

// Flat MLP layout: [hidden weights | hidden biases | output weights | output bias].
const W1: usize = 0;
const B1: usize = HIDDEN_UNITS;
const W2: usize = 2 * HIDDEN_UNITS;
const B2: usize = 3 * HIDDEN_UNITS;
const MLP_PARAMS: usize = 3 * HIDDEN_UNITS + 1;

struct MlpObjective<'a>(&'a Pooled);

impl MlpObjective<'_> {
    fn logit(p: &[f64], x: f64, hidden: &mut [f64; HIDDEN_UNITS]) -> f64 {
        let mut z = p[B2];
        for j in 0..HIDDEN_UNITS {
            hidden[j] = (p[W1 + j] * x + p[B1 + j]).max(0.0);
            z += p[W2 + j] * hidden[j];
        }
        z
    }
}

impl Objective for MlpObjective<'_> {
    fn loss_and_grad(&self, p: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let mut hidden = [0.0; HIDDEN_UNITS];
        let mut total = 0.0;
        for g in &self.0.groups {
            let z = Self::logit(p, g.x, &mut hidden);
            let (l, dz) = group_loss(g, z);
            total += l;
            grad[B2] += dz;
            for j in 0..HIDDEN_UNITS {
                grad[W2 + j] += dz * hidden[j];
                if hidden[j] > 0.0 {
                    let dh = dz * p[W2 + j];
                    grad[W1 + j] += dh * g.x;
                    grad[B1 + j] += dh;
                }
            }
        }
        let n = self.0.total;
        grad.iter_mut().for_each(|d| *d /= n);
        total / n
    }
}

/// Descent with step-halving: a step that raises the loss is rejected and
/// the step size halved, so the accepted loss sequence never increases.
/// Returns the loss after every step (including rejected ones, which repeat
/// the previous value).
fn descend<O: Objective>(objective: &O, params: &mut [f64], cfg: &FitConfig, adaptive: bool) -> Vec<f64> {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    let dim = params.len();
    let mut grad = vec![0.0; dim];
    let mut candidate = vec![0.0; dim];
    let mut candidate_grad = vec![0.0; dim];
    let mut m = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut lr = cfg.step_size;
    let mut loss = objective.loss_and_grad(params, &mut grad);
    let mut losses = Vec::with_capacity(cfg.steps + 1);
    losses.push(loss);
    for t in 1..=cfg.steps {
        if adaptive {
            let (c1, c2) = (1.0 - libm::pow(BETA1, t as f64), 1.0 - libm::pow(BETA2, t as f64));
            for i in 0..dim {
                let mi = BETA1 * m[i] + (1.0 - BETA1) * grad[i];
                let vi = BETA2 * v[i] + (1.0 - BETA2) * grad[i] * grad[i];
                candidate[i] = params[i] - lr * (mi / c1) / (libm::sqrt(vi / c2) + EPS);
                m[i] = mi;
                v[i] = vi;
            }
        } else {
            for i in 0..dim {
                candidate[i] = params[i] - lr * grad[i];
            }
        }
        let next = objective.loss_and_grad(&candidate, &mut candidate_grad);
        if next.is_finite() && next <= loss {
            params.copy_from_slice(&candidate);
            core::mem::swap(&mut grad, &mut candidate_grad);
            loss = next;
        } else {
            lr *= 0.5;
        }
        losses.push(loss);
    }
    losses
}

/// A fitted model plus its training-loss trace.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub model: DemandModel,
    pub losses: Vec<f64>,
}

/// Fits a demand curve to every observation in `store`.
pub fn fit(store: &ObservationStore, kind: DemandKind, cfg: &FitConfig) -> Result<DemandModel> {
    fit_traced(store, kind, cfg).map(|r| r.model)
}

pub fn fit_traced(store: &ObservationStore, kind: DemandKind, cfg: &FitConfig) -> Result<FitReport> {
    if store.is_empty() {
        return Err(Error::EmptyObservations);
    }
    if !(cfg.step_size.is_finite() && cfg.step_size > 0.0) {
        return Err(Error::InvalidParameter {
            name: "step_size",
            value: cfg.step_size,
            expected: "finite and > 0",
        });
    }
    let pooled = pool(store.as_slice());
    let trained_on = store.len();
    if pooled.cleared == 0.0 || pooled.cleared == pooled.total {
        let p = pooled.cleared / pooled.total;
        return Ok(FitReport {
            model: DemandModel { kind, params: Some(DemandParams::Constant(p)), trained_on },
            losses: Vec::new(),
        });
    }
    let (params, losses) = match kind {
        DemandKind::Logistic => {
            let mut p = [0.0, 0.0];
            let losses = descend(&LogisticObjective(&pooled), &mut p, cfg, false);
            // back to raw reserve units
            let slope = p[1] / pooled.scale;
            let intercept = p[0] - slope * pooled.offset;
            (DemandParams::Logistic { intercept, slope }, losses)
        }
        DemandKind::Mlp => {
            let mut rng = crate::StreamRng::seed_from_u64(cfg.seed);
            let mut p = [0.0; MLP_PARAMS];
            init_mlp(&mut p, &mut rng);
            // Plain gradient steps at this step size underfit within 500 steps;
            // Adam-scaled steps converge, still under the halving rule.
            let losses = descend(&MlpObjective(&pooled), &mut p, cfg, true);
            let mut m = MlpParams {
                input_offset: pooled.offset,
                input_scale: pooled.scale,
                hidden_weights: [0.0; HIDDEN_UNITS],
                hidden_biases: [0.0; HIDDEN_UNITS],
                output_weights: [0.0; HIDDEN_UNITS],
                output_bias: p[B2],
            };
            m.hidden_weights.copy_from_slice(&p[W1..B1]);
            m.hidden_biases.copy_from_slice(&p[B1..W2]);
            m.output_weights.copy_from_slice(&p[W2..B2]);
            (DemandParams::Mlp(m), losses)
        }
    };
    let model = DemandModel::from_parts(kind, params, trained_on)?;
    Ok(FitReport { model, losses })
}

fn init_mlp<R: Rng>(p: &mut [f64], rng: &mut R) {
    for w in p.iter_mut() {
        *w = rng.gen_range(-0.1..=0.1);
    }
}

/// Mean absolute gap between predicted and observed clearing rates, weighted
/// by the number of observations at each reserve.
pub fn holdout_error(model: &DemandModel, observations: &[DemandObservation]) -> Result<f64> {
    if observations.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let pooled = pool(observations);
    let mut total = 0.0;
    for g in &pooled.groups {
        let r = g.x * pooled.scale + pooled.offset;
        total += g.count * (model.predict(r)? - g.cleared / g.count).abs();
    }
    Ok(total / pooled.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derive_stream;

    fn uniform_demand_store(n: usize, seed: u64) -> ObservationStore {
        let mut rng = derive_stream(seed, 0);
        let mut store = ObservationStore::new();
        for _ in 0..n {
            let r = rng.gen_range(0.1..0.9);
            let v: f64 = rng.gen();
            store.push(DemandObservation { reserve: r, cleared: v >= r });
        }
        store
    }

    fn grid_mae(model: &DemandModel) -> f64 {
        (1..=9)
            .map(|i| {
                let r = i as f64 / 10.0;
                (model.predict(r).unwrap() - (1.0 - r)).abs()
            })
            .sum::<f64>()
            / 9.0
    }

    #[test]
    fn record_appends_both_arms() {
        let batch = BidBatch::new(0.5, 0.4, vec![0.6, 0.0], vec![0.0, 0.5]).unwrap();
        let mut store = ObservationStore::new();
        store.record(&batch);
        assert_eq!(store.len(), 4);
        assert_eq!(
            &store.as_slice()[2..],
            &[
                DemandObservation { reserve: 0.4, cleared: false },
                DemandObservation { reserve: 0.4, cleared: true }
            ]
        );
        let before = store.clone();
        store.record(&batch);
        assert_eq!(&store.as_slice()[..4], before.as_slice());
        assert_eq!(&store.as_slice()[4..], before.as_slice());
    }

    #[test]
    fn zero_logistic_predicts_half() {
        let m = DemandModel::logistic(0.0, 0.0).unwrap();
        assert_eq!(m.predict(0.3).unwrap(), 0.5);
        assert_eq!(m.predict(7.0).unwrap(), 0.5);
    }

    #[test]
    fn unfitted_model_errors() {
        let m = DemandModel::untrained(DemandKind::Mlp);
        assert_eq!(m.predict(0.3), Err(Error::UnfittedModel));
    }

    #[test]
    fn empty_store_errors() {
        let cfg = FitConfig::default_for(DemandKind::Logistic);
        assert_eq!(fit(&ObservationStore::new(), DemandKind::Logistic, &cfg), Err(Error::EmptyObservations));
    }

    #[test]
    fn all_cleared_saturates() {
        let mut store = ObservationStore::new();
        for i in 0..100 {
            store.push(DemandObservation { reserve: 0.1 + 0.008 * i as f64, cleared: true });
        }
        for kind in [DemandKind::Logistic, DemandKind::Mlp] {
            let m = fit(&store, kind, &FitConfig::default_for(kind)).unwrap();
            for i in 0..=10 {
                assert!(m.predict(0.1 + 0.08 * i as f64).unwrap() >= 0.99);
            }
        }
    }

    #[test]
    fn logistic_recovers_uniform_demand() {
        let store = uniform_demand_store(10_000, 5);
        let m = fit(&store, DemandKind::Logistic, &FitConfig::default_for(DemandKind::Logistic)).unwrap();
        match m.params() {
            Some(DemandParams::Logistic { slope, .. }) => assert!(*slope < 0.0),
            other => panic!("unexpected params {other:?}"),
        }
        assert!(m.predict(0.2).unwrap() > m.predict(0.8).unwrap());
        let mae = grid_mae(&m);
        assert!(mae <= 0.05, "logistic MAE {mae}");
        assert_eq!(m.trained_on(), 10_000);
    }

    #[test]
    fn mlp_recovers_uniform_demand() {
        let store = uniform_demand_store(10_000, 6);
        let m = fit(&store, DemandKind::Mlp, &FitConfig::default_for(DemandKind::Mlp)).unwrap();
        let mae = grid_mae(&m);
        assert!(mae <= 0.05, "mlp MAE {mae}");
    }

    #[test]
    fn loss_never_increases() {
        let store = uniform_demand_store(2_000, 7);
        for kind in [DemandKind::Logistic, DemandKind::Mlp] {
            let cfg = FitConfig { steps: 300, step_size: 5.0, seed: 3 };
            let report = fit_traced(&store, kind, &cfg).unwrap();
            assert_eq!(report.losses.len(), 301);
            for w in report.losses.windows(2) {
                assert!(w[1] <= w[0], "{kind:?}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn fitting_is_deterministic() {
        let store = uniform_demand_store(3_000, 8);
        for kind in [DemandKind::Logistic, DemandKind::Mlp] {
            let cfg = FitConfig { seed: 42, ..FitConfig::default_for(kind) };
            assert_eq!(fit(&store, kind, &cfg).unwrap(), fit(&store, kind, &cfg).unwrap());
        }
    }

    #[test]
    fn holdout_error_of_exact_constant() {
        let obs = [
            DemandObservation { reserve: 0.3, cleared: true },
            DemandObservation { reserve: 0.3, cleared: false },
        ];
        let m = DemandModel::constant(0.5).unwrap();
        assert_eq!(holdout_error(&m, &obs).unwrap(), 0.0);
    }
}
