//! Small-sample statistics shared by the oracles, harness and tests.

use alloc::vec::Vec;

/// Moments of a sample, computed with a two-pass algorithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    pub count: usize,
    pub mean: f64,
    /// Unbiased (n - 1) sample variance. Zero when `count < 2`.
    pub variance: f64,
    /// Central fourth moment (1/n normalisation).
    pub fourth_moment: f64,
}

impl SampleStats {
    pub fn from_slice(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return SampleStats { count: 0, mean: 0.0, variance: 0.0, fourth_moment: 0.0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let (mut m2, mut m4) = (0.0, 0.0);
        for &x in xs {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m4 += d2 * d2;
        }
        let variance = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        SampleStats { count: n, mean, variance, fourth_moment: m4 / n as f64 }
    }

    pub fn std_dev(&self) -> f64 {
        libm::sqrt(self.variance)
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        libm::sqrt(self.variance / self.count as f64)
    }

    /// Large-sample standard error of the sample variance,
    /// `sqrt((m4 - s^4) / n)`.
    pub fn variance_std_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let s4 = self.variance * self.variance;
        libm::sqrt((self.fourth_moment - s4).max(0.0) / self.count as f64)
    }

    /// Half-width of the normal-approximation 95% confidence interval.
    pub fn ci95_half_width(&self) -> f64 {
        1.96 * self.std_error()
    }
}

/// Streaming mean and variance (Welford), for samples too large to store.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count > 1 {
            self.m2 / (self.count - 1) as f64
        } else {
            0.0
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        libm::sqrt(self.variance() / self.count as f64)
    }
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        // advance past every copy of the smallest pending value so atoms are
        // compared after both step functions have jumped
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sample Kolmogorov-Smirnov statistic against a continuous or
/// step reference CDF.
pub fn ks_against_cdf<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    if samples.is_empty() {
        return 1.0;
    }
    let xs = sorted(samples);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let below = i as f64 / n;
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        let at = i as f64 / n;
        d = d.max((at - cdf(x)).abs()).max((below - cdf_left(&cdf, x)).abs());
    }
    d
}

// Left limit of a CDF, approximated just below `x`; exact for step CDFs whose
// atoms sit on representable points.
fn cdf_left<F: Fn(f64) -> f64>(cdf: &F, x: f64) -> f64 {
    let below = if x > 0.0 { x * (1.0 - f64::EPSILON) } else { x - f64::MIN_POSITIVE };
    cdf(below)
}

/// One-sided sign-test p-value: probability of at least `wins` successes in
/// `trials` fair coin flips.
pub fn sign_test_p_value(wins: usize, trials: usize) -> f64 {
    if wins == 0 {
        return 1.0;
    }
    if wins > trials {
        return 0.0;
    }
    // pmf(k) = C(n, k) / 2^n, accumulated in log space to stay finite for large n
    let ln2 = core::f64::consts::LN_2;
    let mut total = 0.0;
    for k in wins..=trials {
        let ln_pmf = ln_choose(trials, k) - trials as f64 * ln2;
        total += libm::exp(ln_pmf);
    }
    total.min(1.0)
}

fn ln_choose(n: usize, k: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_small_sample() {
        let s = SampleStats::from_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-12);
        assert!((s.std_error() - libm::sqrt(5.0 / 12.0)).abs() < 1e-12);
    }

    #[test]
    fn empty_and_singleton_are_degenerate() {
        let e = SampleStats::from_slice(&[]);
        assert_eq!(e.count, 0);
        assert_eq!(e.std_error(), 0.0);
        let one = SampleStats::from_slice(&[3.0]);
        assert_eq!(one.variance, 0.0);
        assert_eq!(one.ci95_half_width(), 0.0);
    }

    #[test]
    fn ks_identical_samples_is_zero() {
        let a = [0.1, 0.2, 0.2, 0.7];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
    }

    #[test]
    fn ks_disjoint_samples_is_one() {
        assert_eq!(ks_two_sample(&[0.1, 0.2], &[0.5, 0.6, 0.9]), 1.0);
    }

    #[test]
    fn ks_against_uniform_grid() {
        let xs: Vec<f64> = (1..=100).map(|i| i as f64 / 100.0).collect();
        let d = ks_against_cdf(&xs, |x| x.clamp(0.0, 1.0));
        assert!(d <= 0.0100001, "{d}");
    }

    #[test]
    fn ks_against_step_cdf_with_atoms() {
        // two-point law at 0.2 and 0.8, sample matches exactly
        let xs = [0.2, 0.2, 0.8, 0.8];
        let cdf = |x: f64| if x < 0.2 { 0.0 } else if x < 0.8 { 0.5 } else { 1.0 };
        assert!(ks_against_cdf(&xs, cdf) < 1e-12);
    }

    #[test]
    fn sign_test_values() {
        // P[X >= 5 | n = 5] = 1/32
        assert!((sign_test_p_value(5, 5) - 1.0 / 32.0).abs() < 1e-12);
        // P[X >= 0] = 1
        assert_eq!(sign_test_p_value(0, 10), 1.0);
        // symmetric: P[X >= 3 | n = 5] = 1/2
        assert!((sign_test_p_value(3, 5) - 0.5).abs() < 1e-12);
    }
}
