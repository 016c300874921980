//! Brute-force and closed-form ground truth.
//!
//! Everything here is deliberately simple: sample means over many auctions,
//! analytic integrals for the uniform cases, and exhaustive grids.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::estimators::{
    bid_truncation_excess_gradient, compose_gradient, naive_demand_gradient, naive_gradient,
    quantile_truncation_excess_gradient, BidBatch, ExcessMethod,
};
use crate::market::{BidSample, BidSource, Market, ResponseModel, ResponseNoise, ValueDistribution};
use crate::stats::{RunningStats, SampleStats};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevenueEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// Monte Carlo revenue at reserve `r`: the mean recorded bid, losses as 0.
pub fn revenue<S, R>(source: &S, r: f64, n: usize, rng: &mut R) -> Result<RevenueEstimate>
where
    S: BidSource + ?Sized,
    R: Rng + ?Sized,
{
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let bids: Vec<f64> = source.sample_bids(r, n, rng).iter().map(|b| b.bid).collect();
    let stats = SampleStats::from_slice(&bids);
    Ok(RevenueEstimate { mean: stats.mean, std_error: stats.std_error(), n_samples: n })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClosedFormCase {
    /// Uniform values, perfect response with linear shading.
    UniformPerfect { shading: f64 },
    /// Equilibrium among `bidders` uniform-value bidders.
    UniformEquilibrium { bidders: u32 },
}

impl ClosedFormCase {
    pub fn market(&self) -> Result<Market> {
        match *self {
            ClosedFormCase::UniformPerfect { shading } => Market::uniform_perfect(shading),
            ClosedFormCase::UniformEquilibrium { bidders } => Market::uniform_equilibrium(bidders),
        }
    }
}

/// Exact revenue for the analytic cases, `r` in `[0, 1]`.
pub fn closed_form_revenue(case: ClosedFormCase, r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidParameter { name: "reserve", value: r, expected: "in [0, 1]" });
    }
    match case {
        ClosedFormCase::UniformPerfect { shading: g } => {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::UnsupportedCase("shading outside (0, 1]"));
            }
            if r <= g {
                // gv above r/g, r on [r, r/g)
                Ok(g / 2.0 + r * r / (2.0 * g) - r * r)
            } else {
                Ok(r * (1.0 - r))
            }
        }
        ClosedFormCase::UniformEquilibrium { bidders } => {
            if bidders == 0 {
                return Err(Error::UnsupportedCase("zero bidders"));
            }
            let n = bidders as f64;
            let rn = libm::pow(r, n);
            Ok(rn * (1.0 - r) + (n - 1.0) * (1.0 - rn * r) / (n + 1.0))
        }
    }
}

/// Evenly spaced reserves `lo, lo + step, ..., hi` (inclusive, up to rounding).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReserveGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl ReserveGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        let ReserveGrid { lo, hi, step } = *self;
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
            return Err(Error::NonFinite("grid bound"));
        }
        if step <= 0.0 {
            return Err(Error::InvalidParameter { name: "step", value: step, expected: "> 0" });
        }
        if lo < 0.0 {
            return Err(Error::InvalidParameter { name: "lo", value: lo, expected: ">= 0" });
        }
        if hi < lo {
            return Err(Error::EmptyGrid);
        }
        let count = libm::floor((hi - lo) / step + 1e-9) as usize + 1;
        Ok((0..count).map(|i| (lo + i as f64 * step).min(hi)).collect())
    }
}

/// Revenue at every grid point. Every point replays the same random stream
/// (common random numbers), so differences between points are not blurred by
/// independent noise.
pub fn revenue_curve<S>(source: &S, grid: &[f64], n: usize, seed: u64) -> Result<Vec<(f64, RevenueEstimate)>>
where
    S: BidSource + ?Sized,
{
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    grid.iter()
        .map(|&r| {
            let mut rng = crate::derive_stream(seed, 0);
            revenue(source, r, n, &mut rng).map(|e| (r, e))
        })
        .collect()
}

/// Picks the grid point with the highest estimated revenue; ties go to the
/// smallest reserve.
pub fn argmax_revenue(curve: &[(f64, RevenueEstimate)]) -> Result<(f64, RevenueEstimate)> {
    let mut best: Option<(f64, RevenueEstimate)> = None;
    for &(r, e) in curve {
        best = match best {
            Some((br, be)) if e.mean < be.mean || (e.mean == be.mean && r >= br) => Some((br, be)),
            _ => Some((r, e)),
        };
    }
    best.ok_or(Error::EmptyGrid)
}

pub fn grid_search_optimum<S>(source: &S, grid: &[f64], n: usize, seed: u64) -> Result<(f64, RevenueEstimate)>
where
    S: BidSource + ?Sized,
{
    argmax_revenue(&revenue_curve(source, grid, n, seed)?)
}

/// Which estimator to measure, and against which slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorUnderTest {
    /// Full revenue slope.
    Naive,
    /// Slope of `r D(r)`.
    NaiveDemand,
    /// Excess slope.
    BidTruncation,
    /// Excess slope.
    QuantileTruncation { q: f64 },
    /// Excess estimator plus naive demand; full revenue slope.
    Composite { excess: ExcessMethod },
}

/// The per-auction quantity whose expected slope an estimator targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeTarget {
    Revenue,
    Excess,
    Demand,
}

impl SlopeTarget {
    fn per_auction(&self, sample: BidSample, r: f64) -> f64 {
        match self {
            SlopeTarget::Revenue => sample.bid,
            SlopeTarget::Excess => (sample.bid - r).max(0.0),
            SlopeTarget::Demand => {
                if sample.won {
                    r
                } else {
                    0.0
                }
            }
        }
    }
}

impl EstimatorUnderTest {
    pub fn target(&self) -> SlopeTarget {
        match self {
            EstimatorUnderTest::Naive | EstimatorUnderTest::Composite { .. } => SlopeTarget::Revenue,
            EstimatorUnderTest::NaiveDemand => SlopeTarget::Demand,
            EstimatorUnderTest::BidTruncation | EstimatorUnderTest::QuantileTruncation { .. } => {
                SlopeTarget::Excess
            }
        }
    }

    pub fn evaluate(&self, batch: &BidBatch) -> Result<f64> {
        match *self {
            EstimatorUnderTest::Naive => Ok(naive_gradient(batch).value),
            EstimatorUnderTest::NaiveDemand => Ok(naive_demand_gradient(batch)),
            EstimatorUnderTest::BidTruncation => Ok(bid_truncation_excess_gradient(batch)),
            EstimatorUnderTest::QuantileTruncation { q } => quantile_truncation_excess_gradient(batch, q),
            EstimatorUnderTest::Composite { excess } => {
                let e = match excess {
                    ExcessMethod::BidTruncation => bid_truncation_excess_gradient(batch),
                    ExcessMethod::QuantileTruncation { q } => quantile_truncation_excess_gradient(batch, q)?,
                };
                Ok(compose_gradient(e, naive_demand_gradient(batch))?.value)
            }
        }
    }
}

/// Oracle slope `(m(r_plus) - m(r_minus)) / delta` of a target quantity,
/// from `n` paired auctions: each auction's value and noise are replayed at
/// both reserves, which cancels most of the between-arm noise.
pub fn oracle_slope<R: Rng + ?Sized>(
    market: &Market,
    target: SlopeTarget,
    r_plus: f64,
    r_minus: f64,
    n: usize,
    rng: &mut R,
) -> Result<RevenueEstimate> {
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let delta = r_plus - r_minus;
    let mut acc = RunningStats::default();
    for _ in 0..n {
        let auction = market.draw_auction(rng);
        let hi = BidSample::new(market.bid_for(r_plus, &auction), r_plus);
        let lo = BidSample::new(market.bid_for(r_minus, &auction), r_minus);
        acc.push((target.per_auction(hi, r_plus) - target.per_auction(lo, r_minus)) / delta);
    }
    Ok(RevenueEstimate { mean: acc.mean(), std_error: acc.std_error(), n_samples: n })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureConfig {
    pub reserve: f64,
    pub beta: f64,
    pub samples_per_arm: usize,
    pub replications: usize,
    /// Paired auctions for the oracle slope.
    pub oracle_samples: usize,
}

impl MeasureConfig {
    pub fn new(reserve: f64, beta: f64, samples_per_arm: usize, replications: usize) -> Self {
        MeasureConfig { reserve, beta, samples_per_arm, replications, oracle_samples: 10_000_000 }
    }

    pub fn r_plus(&self) -> f64 {
        (1.0 + self.beta) * self.reserve
    }

    pub fn r_minus(&self) -> f64 {
        (1.0 - self.beta) * self.reserve
    }

    pub fn delta(&self) -> f64 {
        self.r_plus() - self.r_minus()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasVarianceReport {
    /// Mean estimate minus the oracle slope.
    pub empirical_bias: f64,
    /// Combined standard error of the replication mean and the oracle.
    pub bias_se: f64,
    pub empirical_variance: f64,
    pub variance_se: f64,
    pub oracle_slope: f64,
    pub oracle_se: f64,
    pub mean_estimate: f64,
    pub replications: usize,
}

pub const MIN_REPLICATIONS: usize = 100;

/// Replicates an estimator on fresh batches and compares it with the oracle.
pub fn measure_estimator<R: Rng + ?Sized>(
    estimator: EstimatorUnderTest,
    market: &Market,
    cfg: &MeasureConfig,
    rng: &mut R,
) -> Result<BiasVarianceReport> {
    if cfg.replications < MIN_REPLICATIONS {
        return Err(Error::TooFewReplications { needed: MIN_REPLICATIONS, got: cfg.replications });
    }
    if !(cfg.beta > 0.0 && cfg.beta < 1.0) {
        return Err(Error::InvalidParameter { name: "beta", value: cfg.beta, expected: "in (0, 1)" });
    }
    if !(cfg.reserve > 0.0) {
        return Err(Error::InvalidParameter { name: "reserve", value: cfg.reserve, expected: "> 0" });
    }
    let (r_plus, r_minus, n) = (cfg.r_plus(), cfg.r_minus(), cfg.samples_per_arm);
    let mut estimates = Vec::with_capacity(cfg.replications);
    for _ in 0..cfg.replications {
        let plus = market.sample_bids(r_plus, n, rng);
        let minus = market.sample_bids(r_minus, n, rng);
        estimates.push(estimator.evaluate(&BidBatch::from_samples(r_plus, r_minus, &plus, &minus)?)?);
    }
    let stats = SampleStats::from_slice(&estimates);
    let oracle = oracle_slope(market, estimator.target(), r_plus, r_minus, cfg.oracle_samples, rng)?;
    let se = stats.std_error();
    Ok(BiasVarianceReport {
        empirical_bias: stats.mean - oracle.mean,
        bias_se: libm::sqrt(se * se + oracle.std_error * oracle.std_error),
        empirical_variance: stats.variance,
        variance_se: stats.variance_std_error(),
        oracle_slope: oracle.mean,
        oracle_se: oracle.std_error,
        mean_estimate: stats.mean,
        replications: cfg.replications,
    })
}

fn excess_and_demand(samples: &[BidSample], r: f64) -> (RunningStats, RunningStats, RunningStats) {
    let (mut rev, mut exc, mut dem) = Default::default();
    for s in samples {
        RunningStats::push(&mut rev, s.bid);
        RunningStats::push(&mut exc, (s.bid - r).max(0.0));
        RunningStats::push(&mut dem, s.won as u8 as f64);
    }
    (rev, exc, dem)
}

/// `|mu(r) - (E(r) + r D(r))|` with all three estimated on one sample; zero up
/// to rounding since each bid splits exactly into excess plus reserve.
pub fn decomposition_residual<S, R>(source: &S, r: f64, n: usize, rng: &mut R) -> Result<f64>
where
    S: BidSource + ?Sized,
    R: Rng + ?Sized,
{
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let samples = source.sample_bids(r, n, rng);
    let mut rev = 0.0;
    let mut exc = 0.0;
    let mut won = 0usize;
    for s in &samples {
        rev += s.bid;
        exc += (s.bid - r).max(0.0);
        won += s.won as usize;
    }
    let nf = n as f64;
    Ok((rev / nf - (exc / nf + r * won as f64 / nf)).abs())
}

/// The same residual with revenue, excess and demand each estimated on its
/// own sample. Returns the residual and its combined standard error.
pub fn decomposition_residual_independent<S, R>(source: &S, r: f64, n: usize, rng: &mut R) -> Result<(f64, f64)>
where
    S: BidSource + ?Sized,
    R: Rng + ?Sized,
{
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let (rev, _, _) = excess_and_demand(&source.sample_bids(r, n, rng), r);
    let (_, exc, _) = excess_and_demand(&source.sample_bids(r, n, rng), r);
    let (_, _, dem) = excess_and_demand(&source.sample_bids(r, n, rng), r);
    let residual = (rev.mean() - (exc.mean() + r * dem.mean())).abs();
    let var = rev.std_error() * rev.std_error()
        + exc.std_error() * exc.std_error()
        + r * r * dem.std_error() * dem.std_error();
    Ok((residual, libm::sqrt(var)))
}

/// Variance bound of the naive estimator, `1 / (2 delta^2 n)`.
pub fn naive_variance_bound(delta: f64, n: usize) -> f64 {
    1.0 / (2.0 * delta * delta * n as f64)
}

/// Variance bound of bid truncation, `1 / (4 n)`.
pub fn bid_truncation_variance_bound(n: usize) -> f64 {
    1.0 / (4.0 * n as f64)
}

/// Bias bound of bid truncation under eps-bounded response, `2 eps / delta`.
pub fn eps_bounded_bias_bound(eps: f64, delta: f64) -> f64 {
    2.0 * eps / delta
}

/// Variance bound of the naive demand estimator, `r_plus^2 / (2 n delta^2)`.
pub fn naive_demand_variance_bound(r_plus: f64, delta: f64, n: usize) -> f64 {
    r_plus * r_plus / (2.0 * n as f64 * delta * delta)
}

/// `t = F^-1(q)` and `t~ = F^-1(q + n^(-2/3))` for the quantile bounds.
pub fn quantile_thresholds(values: &ValueDistribution, q: f64, n: usize) -> (f64, f64) {
    let shift = libm::pow(n as f64, -2.0 / 3.0);
    (values.inverse_cdf(q), values.inverse_cdf((q + shift).min(1.0)))
}

/// Bias bound of quantile truncation:
/// `(1 - q)(b(r_plus, t) - b(r_minus, t)) / delta + 6 n^(-2/3)`.
pub fn quantile_bias_bound(response: &ResponseModel, r_plus: f64, r_minus: f64, t: f64, q: f64, n: usize) -> f64 {
    let noise = ResponseNoise::default();
    let gap = response.bid_with(r_plus, t, &noise) - response.bid_with(r_minus, t, &noise);
    (1.0 - q) * gap / (r_plus - r_minus) + 6.0 * libm::pow(n as f64, -2.0 / 3.0)
}

/// Leading variance term of quantile truncation, `2 t~^2 / (n delta^2)`,
/// inflated by `1 + slack` for the unspecified lower-order term.
pub fn quantile_variance_bound(t_tilde: f64, delta: f64, n: usize, slack: f64) -> f64 {
    2.0 * t_tilde * t_tilde / (n as f64 * delta * delta) * (1.0 + slack)
}
