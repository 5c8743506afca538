//! Numeric helpers shared across modules.
//!
//! Everything routes through `libm` so that the crate builds without `std`
//! and produces the same bits on every platform.

use crate::{Error, Result};

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `ln Σ exp(x_i)`, stable for arbitrarily large or small inputs.
pub fn log_sum_exp(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut max = f64::NEG_INFINITY;
    for &x in xs {
        if !x.is_finite() {
            return Err(Error::NonFinite("log weight"));
        }
        if x > max {
            max = x;
        }
    }
    let sum = neumaier_sum(xs.iter().map(|&x| exp(x - max)));
    Ok(max + ln(sum))
}

/// Compensated summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if libm::fabs(sum) >= libm::fabs(v) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Running mean and variance (Welford). A stream of identical values yields
/// exactly that value as the mean and exactly zero variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningMoments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two values.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            sqrt(self.variance() / self.count as f64)
        }
    }
}

impl Extend<f64> for RunningMoments {
    fn extend<T: IntoIterator<Item = f64>>(&mut self, iter: T) {
        for x in iter {
            self.push(x);
        }
    }
}

impl FromIterator<f64> for RunningMoments {
    fn from_iter<T: IntoIterator<Item = f64>>(iter: T) -> Self {
        let mut m = Self::new();
        m.extend(iter);
        m
    }
}

/// Linear-interpolation quantile of already sorted data (R type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median of unsorted data; `None` when empty or when any value is NaN.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut v = alloc::vec::Vec::from(values);
    v.sort_by(f64::total_cmp);
    Some(quantile_sorted(&v, 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_sum_exp_shift_invariant() {
        let a = log_sum_exp(&[0.0, -2.0, -1.0]).unwrap();
        let b = log_sum_exp(&[-1000.0, -1002.0, -1001.0]).unwrap();
        assert!((a - (b + 1000.0)).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_rejects_empty_and_nan() {
        assert_eq!(log_sum_exp(&[]), Err(Error::EmptyInput));
        assert!(log_sum_exp(&[0.0, f64::NAN]).is_err());
    }

    #[test]
    fn running_moments_constant_stream() {
        let m: RunningMoments = core::iter::repeat_n(0.3, 1000).collect();
        assert_eq!(m.mean(), 0.3);
        assert_eq!(m.variance(), 0.0);
        assert_eq!(m.std_error(), 0.0);
    }

    #[test]
    fn running_moments_two_values() {
        let m: RunningMoments = [1.0, 3.0].into_iter().collect();
        assert_eq!(m.mean(), 2.0);
        assert_eq!(m.variance(), 2.0);
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert_eq!(quantile_sorted(&v, 0.5), 2.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[]), None);
    }
}
