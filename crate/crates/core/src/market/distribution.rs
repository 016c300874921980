use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};

/// Distribution `F` of the highest bidder value, supported on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueDistribution {
    Uniform01,
    /// `F(v) = v^k`; `k = n` is the maximum of `n` independent uniform values.
    Power { exponent: f64 },
    Empirical(EmpiricalDistribution),
}

impl ValueDistribution {
    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(Error::InvalidParameter {
                name: "power exponent",
                value: exponent,
                expected: "finite and > 0",
            });
        }
        Ok(ValueDistribution::Power { exponent })
    }

    pub fn empirical(values: Vec<f64>, declared_max: Option<f64>) -> Result<Self> {
        EmpiricalDistribution::new(values, declared_max).map(ValueDistribution::Empirical)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ValueDistribution::Uniform01 => rng.gen::<f64>(),
            ValueDistribution::Power { exponent } => libm::pow(rng.gen::<f64>(), 1.0 / exponent),
            ValueDistribution::Empirical(e) => e.support[rng.gen_range(0..e.support.len())],
        }
    }

    pub fn cdf(&self, v: f64) -> f64 {
        if v < 0.0 {
            return 0.0;
        }
        match self {
            ValueDistribution::Uniform01 => v.min(1.0),
            ValueDistribution::Power { exponent } => libm::pow(v.min(1.0), *exponent),
            ValueDistribution::Empirical(e) => e.cdf(v),
        }
    }

    /// Generalised inverse `inf { v : F(v) >= u }`, with `u` clamped to `[0, 1]`.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            ValueDistribution::Uniform01 => u,
            ValueDistribution::Power { exponent } => libm::pow(u, 1.0 / exponent),
            ValueDistribution::Empirical(e) => e.inverse_cdf(u),
        }
    }
}

/// Equal-weight distribution over a finite multiset of values.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    support: Vec<f64>,
}

impl EmpiricalDistribution {
    /// Builds the distribution from raw values.
    ///
    /// Values are divided by `declared_max` when given; otherwise values
    /// already inside `[0, 1]` are kept as they are and larger ones are
    /// rescaled by the observed maximum.
    pub fn new(mut values: Vec<f64>, declared_max: Option<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        if let Some(&bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter { name: "value", value: bad, expected: "finite" });
        }
        if let Some(&bad) = values.iter().find(|&&v| v < 0.0) {
            return Err(Error::InvalidParameter { name: "value", value: bad, expected: ">= 0" });
        }
        let observed_max = values.iter().cloned().fold(0.0, f64::max);
        let scale = match declared_max {
            Some(m) if !(m.is_finite() && m > 0.0) => {
                return Err(Error::InvalidParameter {
                    name: "declared maximum",
                    value: m,
                    expected: "finite and > 0",
                })
            }
            Some(m) if observed_max > m => {
                return Err(Error::InvalidParameter {
                    name: "value",
                    value: observed_max,
                    expected: "<= declared maximum",
                })
            }
            Some(m) => m,
            None if observed_max > 1.0 => observed_max,
            None => 1.0,
        };
        if scale != 1.0 {
            for v in &mut values {
                *v = (*v / scale).min(1.0);
            }
        }
        values.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution { support: values })
    }

    /// Sorted, normalised support points (with multiplicity).
    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn cdf(&self, v: f64) -> f64 {
        let below_or_at = self.support.partition_point(|&x| x <= v);
        below_or_at as f64 / self.support.len() as f64
    }

    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let m = self.support.len();
        let k = libm::ceil(u * m as f64) as usize;
        self.support[k.clamp(1, m) - 1]
    }

    /// Exact demand `Pr[v >= r]`.
    pub fn survival_at_or_above(&self, r: f64) -> f64 {
        let below = self.support.partition_point(|&x| x < r);
        (self.support.len() - below) as f64 / self.support.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::derive_stream;
    use alloc::vec;

    #[test]
    fn uniform_mean_and_range() {
        let mut rng = derive_stream(1, 0);
        let d = ValueDistribution::Uniform01;
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let v = d.sample(&mut rng);
            assert!((0.0..=1.0).contains(&v));
            sum += v;
        }
        assert!((sum / n as f64 - 0.5).abs() <= 0.002);
    }

    #[test]
    fn power_two_cdf_at_half() {
        let mut rng = derive_stream(2, 0);
        let d = ValueDistribution::power(2.0).unwrap();
        let n = 1_000_000;
        let below = (0..n).filter(|_| d.sample(&mut rng) <= 0.5).count();
        assert!((below as f64 / n as f64 - 0.25).abs() <= 0.005);
        assert_eq!(d.cdf(0.5), 0.25);
    }

    #[test]
    fn two_point_law_frequencies() {
        let mut rng = derive_stream(3, 0);
        let d = ValueDistribution::empirical(vec![0.2, 0.8], None).unwrap();
        let n = 200_000;
        let mut low = 0;
        for _ in 0..n {
            let v = d.sample(&mut rng);
            assert!(v == 0.2 || v == 0.8);
            low += (v == 0.2) as usize;
        }
        assert!((low as f64 / n as f64 - 0.5).abs() <= 0.01);
    }

    #[test]
    fn empirical_cdf_and_inverse_round_trip() {
        let d = EmpiricalDistribution::new(vec![0.8, 0.2, 0.5, 0.5], None).unwrap();
        assert_eq!(d.support(), &[0.2, 0.5, 0.5, 0.8]);
        assert_eq!(d.cdf(0.1), 0.0);
        assert_eq!(d.cdf(0.5), 0.75);
        assert_eq!(d.cdf(1.0), 1.0);
        for &v in d.support() {
            assert_eq!(d.inverse_cdf(d.cdf(v)), v);
        }
        assert_eq!(d.inverse_cdf(0.0), 0.2);
        assert_eq!(d.survival_at_or_above(0.5), 0.75);
    }

    #[test]
    fn empirical_normalisation() {
        let d = EmpiricalDistribution::new(vec![1.0, 4.0, 2.0], None).unwrap();
        assert_eq!(d.support(), &[0.25, 0.5, 1.0]);
        let d = EmpiricalDistribution::new(vec![1.0, 2.0], Some(8.0)).unwrap();
        assert_eq!(d.support(), &[0.125, 0.25]);
        assert!(EmpiricalDistribution::new(vec![1.0, 9.0], Some(8.0)).is_err());
        assert_eq!(EmpiricalDistribution::new(vec![], None), Err(Error::EmptyDistribution));
        assert!(EmpiricalDistribution::new(vec![-0.1], None).is_err());
    }

    #[test]
    fn power_rejects_bad_exponent() {
        assert!(ValueDistribution::power(0.0).is_err());
        assert!(ValueDistribution::power(f64::NAN).is_err());
    }

    #[test]
    fn cdf_edges() {
        for d in [ValueDistribution::Uniform01, ValueDistribution::power(3.0).unwrap()] {
            assert_eq!(d.cdf(-1e-9), 0.0);
            assert_eq!(d.cdf(1.0), 1.0);
            assert_eq!(d.inverse_cdf(1.0), 1.0);
        }
    }
}
