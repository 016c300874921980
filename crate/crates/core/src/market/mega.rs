//! Reduction of several independent bidders to one "mega-bidder".
//!
//! The mega-bidder's value is the maximum component value and, at reserve
//! `r`, it bids `B_r^{-1}(F(v))`, where `F` is the law of the maximum value
//! and `B_r` the law of the maximum bid. Neither has a closed form in
//! general, so both are replaced by quantile grids calibrated from joint
//! draws of the components.

use alloc::vec::Vec;

use rand::Rng;

use super::{BidSample, BidSource, Market};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MegaBidder {
    components: Vec<Market>,
    resolution: usize,
    calibration_draws: usize,
    value_knots: Vec<f64>,
}

/// The mega-bidder's bid function frozen at one reserve.
#[derive(Debug, Clone)]
pub struct ReserveBidFunction {
    reserve: f64,
    bid_knots: Vec<f64>,
}

// Linearly interpolated sample quantiles at u = k / resolution, k = 0..=resolution.
fn quantile_knots(mut draws: Vec<f64>, resolution: usize) -> Vec<f64> {
    draws.sort_by(f64::total_cmp);
    let last = (draws.len() - 1) as f64;
    (0..=resolution)
        .map(|k| {
            let pos = last * k as f64 / resolution as f64;
            let lo = libm::floor(pos) as usize;
            let hi = (lo + 1).min(draws.len() - 1);
            let frac = pos - lo as f64;
            draws[lo] + frac * (draws[hi] - draws[lo])
        })
        .collect()
}

fn interpolate_knots(knots: &[f64], u: f64) -> f64 {
    let resolution = knots.len() - 1;
    let pos = u.clamp(0.0, 1.0) * resolution as f64;
    let lo = (libm::floor(pos) as usize).min(resolution);
    if lo == resolution {
        return knots[resolution];
    }
    let frac = pos - lo as f64;
    knots[lo] + frac * (knots[lo + 1] - knots[lo])
}

impl MegaBidder {
    /// Calibrates the value quantile grid from `calibration_draws` joint draws.
    ///
    /// Fails when there are fewer draws than grid cells.
    pub fn build<R: Rng + ?Sized>(
        components: Vec<Market>,
        resolution: usize,
        calibration_draws: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParameter {
                name: "components",
                value: 0.0,
                expected: "at least one component bidder",
            });
        }
        if resolution == 0 {
            return Err(Error::InvalidParameter {
                name: "resolution",
                value: 0.0,
                expected: ">= 1",
            });
        }
        if calibration_draws < resolution {
            return Err(Error::InsufficientCalibration { samples: calibration_draws, resolution });
        }
        let mut mega = MegaBidder { components, resolution, calibration_draws, value_knots: Vec::new() };
        let draws = (0..calibration_draws).map(|_| mega.sample_value(rng)).collect();
        mega.value_knots = quantile_knots(draws, resolution);
        Ok(mega)
    }

    pub fn components(&self) -> &[Market] {
        &self.components
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Draws the maximum component value.
    pub fn sample_value<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.components.iter().map(|c| c.sample_value(rng)).fold(0.0, f64::max)
    }

    /// Highest bid when every component bids independently at `reserve`.
    pub fn sample_direct_max_bid<R: Rng + ?Sized>(&self, reserve: f64, rng: &mut R) -> BidSample {
        let bid = self
            .components
            .iter()
            .map(|c| c.sample_bid(reserve, rng).bid)
            .fold(0.0, f64::max);
        BidSample::new(bid, reserve)
    }

    /// Calibrated `F(v)`. When `v` sits on an atom of the value law the rank
    /// is drawn uniformly across the atom, which keeps `F(v)` uniform.
    pub fn value_rank<R: Rng + ?Sized>(&self, v: f64, rng: &mut R) -> f64 {
        let knots = &self.value_knots;
        let r = self.resolution as f64;
        let first_at = knots.partition_point(|&k| k < v);
        let past = knots.partition_point(|&k| k <= v);
        if past > first_at + 1 {
            let lo = first_at as f64 / r;
            let hi = (past - 1) as f64 / r;
            return lo + (hi - lo) * rng.gen::<f64>();
        }
        if past == first_at + 1 {
            return first_at as f64 / r;
        }
        // strictly between knots[first_at - 1] and knots[first_at]
        if first_at == 0 {
            return 0.0;
        }
        if first_at > self.resolution {
            return 1.0;
        }
        let (a, b) = (knots[first_at - 1], knots[first_at]);
        ((first_at - 1) as f64 + (v - a) / (b - a)) / r
    }

    /// Calibrates the maximum-bid quantile grid at `reserve`.
    pub fn at_reserve<R: Rng + ?Sized>(&self, reserve: f64, rng: &mut R) -> ReserveBidFunction {
        let draws = (0..self.calibration_draws)
            .map(|_| self.sample_direct_max_bid(reserve, rng).bid)
            .collect();
        ReserveBidFunction { reserve, bid_knots: quantile_knots(draws, self.resolution) }
    }
}

impl ReserveBidFunction {
    pub fn reserve(&self) -> f64 {
        self.reserve
    }

    /// Calibrated `B_r^{-1}(u)`.
    pub fn quantile(&self, u: f64) -> f64 {
        interpolate_knots(&self.bid_knots, u)
    }

    /// The reduced bid function `b(r, v) = B_r^{-1}(F(v))`.
    pub fn bid<R: Rng + ?Sized>(&self, mega: &MegaBidder, v: f64, rng: &mut R) -> f64 {
        self.quantile(mega.value_rank(v, rng))
    }

    pub fn sample<R: Rng + ?Sized>(&self, mega: &MegaBidder, rng: &mut R) -> BidSample {
        let v = mega.sample_value(rng);
        BidSample::new(self.bid(mega, v, rng), self.reserve)
    }
}

impl BidSource for MegaBidder {
    /// Recalibrates at `reserve` for every call; prefer [`BidSource::sample_bids`].
    fn sample_bid<R: Rng + ?Sized>(&self, reserve: f64, rng: &mut R) -> BidSample {
        self.at_reserve(reserve, rng).sample(self, rng)
    }

    fn sample_bids<R: Rng + ?Sized>(&self, reserve: f64, n: usize, rng: &mut R) -> Vec<BidSample> {
        let f = self.at_reserve(reserve, rng);
        (0..n).map(|_| f.sample(self, rng)).collect()
    }
}
