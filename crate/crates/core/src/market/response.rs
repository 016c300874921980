use rand::Rng;

use crate::error::{Error, Result};

/// How the highest bidder's bid `b(r, v)` reacts to the reserve `r`.
///
/// Every variant except [`ResponseModel::Equilibrium`] starts from linear
/// shading: without a reserve the bidder bids `shading * v`.
/// Returned bids follow the zero-bid convention: a bid that loses to the
/// reserve is reported as `0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResponseModel {
    /// Raises the bid exactly to the reserve when the shaded bid falls short
    /// but the value clears it.
    Perfect { shading: f64 },
    /// Perfect response plus an overshoot `z ~ U[0, eps]`, never bidding
    /// above value.
    EpsBounded { shading: f64, eps: f64 },
    /// Symmetric equilibrium of `bidders` i.i.d. uniform-value bidders,
    /// evaluated at the highest value.
    Equilibrium { bidders: u32 },
    /// Ignores the reserve entirely.
    NoResponse { shading: f64 },
    /// Perfect response with probability `p_perfect`, no response otherwise.
    Mixture { shading: f64, p_perfect: f64 },
}

/// Per-auction randomness of a response model, drawn once so the same draw
/// can be replayed at several reserves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseNoise {
    /// Overshoot above the reserve for the eps-bounded model, in `[0, eps]`.
    pub overshoot: f64,
    /// Whether a mixture bidder responds to the reserve in this auction.
    pub responds: bool,
}

impl Default for ResponseNoise {
    fn default() -> Self {
        ResponseNoise { overshoot: 0.0, responds: true }
    }
}

fn check_shading(shading: f64) -> Result<()> {
    if shading.is_finite() && shading > 0.0 && shading <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "shading", value: shading, expected: "in (0, 1]" })
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, value, expected: "in [0, 1]" })
    }
}

impl ResponseModel {
    pub fn perfect(shading: f64) -> Result<Self> {
        check_shading(shading)?;
        Ok(ResponseModel::Perfect { shading })
    }

    pub fn eps_bounded(shading: f64, eps: f64) -> Result<Self> {
        check_shading(shading)?;
        check_unit("eps", eps)?;
        Ok(ResponseModel::EpsBounded { shading, eps })
    }

    pub fn equilibrium(bidders: u32) -> Result<Self> {
        if bidders == 0 {
            return Err(Error::InvalidParameter {
                name: "bidders",
                value: 0.0,
                expected: ">= 1",
            });
        }
        Ok(ResponseModel::Equilibrium { bidders })
    }

    pub fn no_response(shading: f64) -> Result<Self> {
        check_shading(shading)?;
        Ok(ResponseModel::NoResponse { shading })
    }

    pub fn mixture(shading: f64, p_perfect: f64) -> Result<Self> {
        check_shading(shading)?;
        check_unit("p_perfect", p_perfect)?;
        Ok(ResponseModel::Mixture { shading, p_perfect })
    }

    /// Bid without a reserve, `b(0, v)`.
    pub fn base_bid(&self, v: f64) -> f64 {
        match *self {
            ResponseModel::Perfect { shading }
            | ResponseModel::EpsBounded { shading, .. }
            | ResponseModel::NoResponse { shading }
            | ResponseModel::Mixture { shading, .. } => shading * v,
            ResponseModel::Equilibrium { bidders } => {
                let n = bidders as f64;
                (n - 1.0) * v / n
            }
        }
    }

    /// Whether bids are guaranteed to be at least the reserve whenever the
    /// value clears it. Models that can ignore the reserve do not.
    pub fn meets_reserve_when_value_clears(&self) -> bool {
        !matches!(self, ResponseModel::NoResponse { .. } | ResponseModel::Mixture { .. })
    }

    pub fn draw_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> ResponseNoise {
        match *self {
            ResponseModel::EpsBounded { eps, .. } => {
                ResponseNoise { overshoot: eps * rng.gen::<f64>(), responds: true }
            }
            ResponseModel::Mixture { p_perfect, .. } => {
                ResponseNoise { overshoot: 0.0, responds: rng.gen::<f64>() < p_perfect }
            }
            _ => ResponseNoise::default(),
        }
    }

    /// Recorded bid at reserve `r` for value `v` under a fixed noise draw.
    pub fn bid_with(&self, r: f64, v: f64, noise: &ResponseNoise) -> f64 {
        if v < r {
            return 0.0;
        }
        match *self {
            ResponseModel::Perfect { shading } => perfect(shading * v, r),
            ResponseModel::EpsBounded { shading, .. } => {
                (shading * v).max((r + noise.overshoot).min(v))
            }
            ResponseModel::Equilibrium { bidders } => equilibrium(bidders, r, v),
            ResponseModel::NoResponse { shading } => unresponsive(shading * v, r),
            ResponseModel::Mixture { shading, .. } => {
                if noise.responds {
                    perfect(shading * v, r)
                } else {
                    unresponsive(shading * v, r)
                }
            }
        }
    }

    pub fn bid<R: Rng + ?Sized>(&self, r: f64, v: f64, rng: &mut R) -> f64 {
        let noise = self.draw_noise(rng);
        self.bid_with(r, v, &noise)
    }
}

#[inline]
fn perfect(base: f64, r: f64) -> f64 {
    if base >= r {
        base
    } else {
        r
    }
}

#[inline]
fn unresponsive(base: f64, r: f64) -> f64 {
    if base >= r {
        base
    } else {
        0.0
    }
}

// b = (r^n + (n - 1) v^n) / (n v^(n - 1)), for v >= r.
fn equilibrium(bidders: u32, r: f64, v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let n = bidders as i32;
    let nf = bidders as f64;
    let vn1 = libm::pow(v, (n - 1) as f64);
    (libm::pow(r, nf) + (nf - 1.0) * vn1 * v) / (nf * vn1)
}
