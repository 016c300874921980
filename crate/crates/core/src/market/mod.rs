//! Value distributions, bidder response models and bid sampling.

mod distribution;
mod mega;
mod response;

pub use distribution::{EmpiricalDistribution, ValueDistribution};
pub use mega::{MegaBidder, ReserveBidFunction};
pub use response::{ResponseModel, ResponseNoise};

use alloc::vec::Vec;

use rand::Rng;

/// One auction outcome at a given reserve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidSample {
    /// Highest bid, `0` when nobody met the reserve.
    pub bid: f64,
    pub won: bool,
}

impl BidSample {
    pub fn new(bid: f64, reserve: f64) -> Self {
        let won = bid > 0.0 && bid >= reserve;
        BidSample { bid: if won { bid } else { 0.0 }, won }
    }
}

/// Anything that can be auctioned off at a reserve and report the highest bid.
pub trait BidSource {
    fn sample_bid<R: Rng + ?Sized>(&self, reserve: f64, rng: &mut R) -> BidSample;

    fn sample_bids<R: Rng + ?Sized>(&self, reserve: f64, n: usize, rng: &mut R) -> Vec<BidSample> {
        (0..n).map(|_| self.sample_bid(reserve, rng)).collect()
    }
}

/// A single representative highest bidder: value law plus response model.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    pub values: ValueDistribution,
    pub response: ResponseModel,
}

impl Market {
    pub fn new(values: ValueDistribution, response: ResponseModel) -> Self {
        Market { values, response }
    }

    /// Uniform values with linear shading and perfect response.
    pub fn uniform_perfect(shading: f64) -> crate::Result<Self> {
        Ok(Market::new(ValueDistribution::Uniform01, ResponseModel::perfect(shading)?))
    }

    /// Equilibrium bidding among `bidders` uniform-value bidders, seen through
    /// the highest value (which has CDF `v^bidders`).
    pub fn uniform_equilibrium(bidders: u32) -> crate::Result<Self> {
        Ok(Market::new(
            ValueDistribution::power(bidders as f64)?,
            ResponseModel::equilibrium(bidders)?,
        ))
    }

    pub fn sample_value<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.values.sample(rng)
    }

    /// Draws the per-auction randomness (value and response noise) so the
    /// same auction can be replayed at several reserves.
    pub fn draw_auction<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, ResponseNoise) {
        let v = self.values.sample(rng);
        let noise = self.response.draw_noise(rng);
        (v, noise)
    }

    pub fn bid_for(&self, reserve: f64, auction: &(f64, ResponseNoise)) -> f64 {
        self.response.bid_with(reserve, auction.0, &auction.1)
    }
}

impl BidSource for Market {
    fn sample_bid<R: Rng + ?Sized>(&self, reserve: f64, rng: &mut R) -> BidSample {
        let auction = self.draw_auction(rng);
        BidSample::new(self.bid_for(reserve, &auction), reserve)
    }
}

/// Draws `n` i.i.d. auctions at reserve `r`.
pub fn sample_bid_distribution<S: BidSource, R: Rng + ?Sized>(
    source: &S,
    reserve: f64,
    n: usize,
    rng: &mut R,
) -> Vec<BidSample> {
    source.sample_bids(reserve, n, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derive_stream;

    fn mean_bid(m: &Market, r: f64, n: usize, seed: u64) -> f64 {
        let mut rng = derive_stream(seed, 0);
        let bids = sample_bid_distribution(m, r, n, &mut rng);
        assert_eq!(bids.len(), n);
        bids.iter().map(|b| b.bid).sum::<f64>() / n as f64
    }

    #[test]
    fn perfect_mean_bid_without_reserve() {
        let m = Market::uniform_perfect(0.4).unwrap();
        assert!((mean_bid(&m, 0.0, 1_000_000, 11) - 0.2).abs() <= 0.001);
    }

    #[test]
    fn perfect_mean_bid_at_half() {
        // revenue r(1 - r) once r exceeds the shading factor
        let m = Market::uniform_perfect(0.4).unwrap();
        assert!((mean_bid(&m, 0.5, 1_000_000, 12) - 0.25).abs() <= 0.002);
    }

    #[test]
    fn zero_count_is_empty() {
        let m = Market::uniform_perfect(0.4).unwrap();
        let mut rng = derive_stream(0, 0);
        assert!(sample_bid_distribution(&m, 0.3, 0, &mut rng).is_empty());
    }

    #[test]
    fn bid_sample_zero_convention() {
        assert_eq!(BidSample::new(0.2, 0.5), BidSample { bid: 0.0, won: false });
        assert_eq!(BidSample::new(0.5, 0.5), BidSample { bid: 0.5, won: true });
        assert_eq!(BidSample::new(0.0, 0.0), BidSample { bid: 0.0, won: false });
    }
}
