//! Discrete-gradient estimators for the revenue curve.
//!
//! Each estimator consumes a [`BidBatch`]: `n` bids observed at reserve
//! `r_plus` and `n` bids observed at `r_minus`, and estimates the slope
//! `(mu(r_plus) - mu(r_minus)) / (r_plus - r_minus)`.
//!
//! Revenue splits per auction as `bid = max(bid - r, 0) + r * 1{won}`, so the
//! slope is the sum of an *excess* slope and a *demand* slope. The excess
//! part can be estimated with bid or quantile truncation, the demand part
//! either from the batch itself or from a fitted [`DemandModel`].

use alloc::vec::Vec;

use crate::demand::DemandModel;
use crate::error::{check_finite, Error, Result};
use crate::market::BidSample;

/// Paired bids from two perturbed reserves.
#[derive(Debug, Clone, PartialEq)]
pub struct BidBatch {
    r_plus: f64,
    r_minus: f64,
    x_plus: Vec<f64>,
    x_minus: Vec<f64>,
}

impl BidBatch {
    /// Validates and stores the batch.
    ///
    /// Requires `r_plus > r_minus >= 0`, equal non-empty arms and every bid
    /// finite and inside `[0, 1]`.
    pub fn new(r_plus: f64, r_minus: f64, x_plus: Vec<f64>, x_minus: Vec<f64>) -> Result<Self> {
        if !(r_plus.is_finite() && r_minus.is_finite()) {
            return Err(Error::NonFinite("reserve"));
        }
        if !(r_minus >= 0.0 && r_plus > r_minus) {
            return Err(Error::InvalidBatch("reserves must satisfy r_plus > r_minus >= 0"));
        }
        if x_plus.is_empty() || x_plus.len() != x_minus.len() {
            return Err(Error::InvalidBatch("arms must be non-empty and of equal length"));
        }
        for &x in x_plus.iter().chain(&x_minus) {
            if !x.is_finite() {
                return Err(Error::NonFinite("bid"));
            }
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::InvalidBatch("bids must lie in [0, 1]"));
            }
        }
        Ok(BidBatch { r_plus, r_minus, x_plus, x_minus })
    }

    pub fn from_samples(r_plus: f64, r_minus: f64, plus: &[BidSample], minus: &[BidSample]) -> Result<Self> {
        BidBatch::new(
            r_plus,
            r_minus,
            plus.iter().map(|s| s.bid).collect(),
            minus.iter().map(|s| s.bid).collect(),
        )
    }

    pub fn r_plus(&self) -> f64 {
        self.r_plus
    }

    pub fn r_minus(&self) -> f64 {
        self.r_minus
    }

    pub fn x_plus(&self) -> &[f64] {
        &self.x_plus
    }

    pub fn x_minus(&self) -> &[f64] {
        &self.x_minus
    }

    /// Samples per arm.
    pub fn len(&self) -> usize {
        self.x_plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_plus.is_empty()
    }

    pub fn delta(&self) -> f64 {
        self.r_plus - self.r_minus
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExcessMethod {
    BidTruncation,
    QuantileTruncation { q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemandMethod {
    Naive,
    Model,
}

/// Which estimator produced a [`GradientEstimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorKind {
    Naive,
    Decomposed { excess: Option<ExcessMethod>, demand: Option<DemandMethod> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientEstimate {
    pub value: f64,
    pub excess_part: Option<f64>,
    pub demand_part: Option<f64>,
    pub kind: EstimatorKind,
    pub n_used: usize,
}

impl GradientEstimate {
    pub fn with_kind(mut self, kind: EstimatorKind, n_used: usize) -> Self {
        self.kind = kind;
        self.n_used = n_used;
        self
    }
}

/// Difference of arm means over the reserve gap.
pub fn naive_gradient(batch: &BidBatch) -> GradientEstimate {
    let sum_plus: f64 = batch.x_plus.iter().sum();
    let sum_minus: f64 = batch.x_minus.iter().sum();
    let value = (sum_plus - sum_minus) / (batch.len() as f64 * batch.delta());
    GradientEstimate {
        value,
        excess_part: None,
        demand_part: None,
        kind: EstimatorKind::Naive,
        n_used: batch.len(),
    }
}

fn cleared_fraction(bids: &[f64], reserve: f64) -> f64 {
    bids.iter().filter(|&&x| x >= reserve && x > 0.0).count() as f64 / bids.len() as f64
}

/// Slope of `r * D(r)` using the empirical clearing rates of the batch.
pub fn naive_demand_gradient(batch: &BidBatch) -> f64 {
    let d_plus = cleared_fraction(&batch.x_plus, batch.r_plus);
    let d_minus = cleared_fraction(&batch.x_minus, batch.r_minus);
    (batch.r_plus * d_plus - batch.r_minus * d_minus) / batch.delta()
}

/// Excess slope from the `r_minus` arm alone, replacing every bid above
/// `r_plus` by the constant contribution `r_plus - r_minus`. Lies in `[-1, 0]`.
pub fn bid_truncation_excess_gradient(batch: &BidBatch) -> f64 {
    let (lo, hi) = (batch.r_minus, batch.r_plus);
    let delta = batch.delta();
    let total: f64 = batch
        .x_minus
        .iter()
        .map(|&x| if x <= hi { (x - lo).max(0.0) } else { delta })
        .sum();
    -total / (batch.len() as f64 * delta)
}

fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    // stable, so equal bids keep their sample order
    v.sort_by(f64::total_cmp);
    v
}

fn kept_count(q: f64, n: usize) -> Result<usize> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter { name: "quantile", value: q, expected: "in (0, 1]" });
    }
    let k = libm::floor(q * n as f64) as usize;
    if k == 0 {
        return Err(Error::QuantileKeepsNoSamples { q, n });
    }
    Ok(k)
}

fn truncated_excess(sorted: &[f64], reserve: f64, kept: usize) -> impl Iterator<Item = f64> + '_ {
    sorted.iter().take(kept).map(move |&x| (x - reserve).max(0.0))
}

/// Excess slope from the lowest `floor(q n)` bids of each arm, plus the
/// constant `-(1 - q)` contributed by the discarded top quantile.
pub fn quantile_truncation_excess_gradient(batch: &BidBatch, q: f64) -> Result<f64> {
    let n = batch.len();
    let k = kept_count(q, n)?;
    let plus = sorted_copy(&batch.x_plus);
    let minus = sorted_copy(&batch.x_minus);
    let sum_plus: f64 = truncated_excess(&plus, batch.r_plus, k).sum();
    let sum_minus: f64 = truncated_excess(&minus, batch.r_minus, k).sum();
    Ok((sum_plus - sum_minus) / (n as f64 * batch.delta()) - (1.0 - q))
}

/// Demand slope from a fitted demand curve; deterministic given the model.
pub fn model_demand_gradient(model: &DemandModel, r_plus: f64, r_minus: f64) -> Result<f64> {
    if !(r_plus > r_minus) {
        return Err(Error::InvalidParameter {
            name: "r_plus - r_minus",
            value: r_plus - r_minus,
            expected: "> 0",
        });
    }
    let f_plus = model.predict(r_plus)?;
    let f_minus = model.predict(r_minus)?;
    Ok((r_plus * f_plus - r_minus * f_minus) / (r_plus - r_minus))
}

/// Sums an excess slope and a demand slope, keeping both parts.
pub fn compose_gradient(excess: f64, demand: f64) -> Result<GradientEstimate> {
    check_finite(excess, "excess slope")?;
    check_finite(demand, "demand slope")?;
    Ok(GradientEstimate {
        value: excess + demand,
        excess_part: Some(excess),
        demand_part: Some(demand),
        kind: EstimatorKind::Decomposed { excess: None, demand: None },
        n_used: 0,
    })
}

/// Estimated bias and variance of quantile truncation at one candidate `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileScore {
    pub q: f64,
    pub bias: f64,
    pub variance: f64,
}

impl QuantileScore {
    pub fn objective(&self) -> f64 {
        self.bias * self.bias + self.variance
    }
}

/// Scores quantile `q` on a batch.
///
/// The bias bound `(1 - q)(b(r+, t) - b(r-, t)) / delta` is estimated by
/// reading the bid gap off the `floor(q n)`-th order statistics of the two
/// arms. The variance proxy is the sample variance of the per-auction
/// truncated excess terms, divided by `n`, summed over both arms.
pub fn score_quantile(batch: &BidBatch, q: f64) -> Result<QuantileScore> {
    let n = batch.len();
    let k = kept_count(q, n)?;
    let delta = batch.delta();
    let plus = sorted_copy(&batch.x_plus);
    let minus = sorted_copy(&batch.x_minus);
    let bias = (1.0 - q) * (plus[k - 1] - minus[k - 1]) / delta;
    let arm_variance = |sorted: &[f64], reserve: f64| {
        let terms: Vec<f64> = sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| if i < k { (x - reserve).max(0.0) / delta } else { 0.0 })
            .collect();
        crate::stats::SampleStats::from_slice(&terms).variance / n as f64
    };
    let variance = arm_variance(&plus, batch.r_plus) + arm_variance(&minus, batch.r_minus);
    Ok(QuantileScore { q, bias, variance })
}

/// Picks the candidate quantile minimising estimated `bias^2 + variance`;
/// ties go to the larger quantile.
pub fn select_quantile(batch: &BidBatch, candidates: &[f64]) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut best: Option<(f64, f64)> = None;
    for &q in candidates {
        let score = score_quantile(batch, q)?.objective();
        best = match best {
            None => Some((q, score)),
            Some((bq, bs)) if score < bs || (score == bs && q > bq) => Some((q, score)),
            keep => keep,
        };
    }
    Ok(best.map(|(q, _)| q).unwrap_or(candidates[0]))
}
