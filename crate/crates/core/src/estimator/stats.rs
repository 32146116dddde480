//! Sample statistics for chain output.

use crate::error::StatsError;
use crate::scalar::Real;

pub fn mean<T: Real>(x: &[T]) -> T {
    x.iter().copied().sum::<T>() / T::lit(x.len() as f64)
}

/// Unbiased sample variance.
pub fn sample_variance<T: Real>(x: &[T]) -> T {
    let m = mean(x);
    x.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::lit(x.len() as f64 - 1.0)
}

/// Unbiased sample covariance.
pub fn sample_covariance<T: Real>(a: &[T], b: &[T]) -> T {
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(&x, &y)| (x - ma) * (y - mb)).sum::<T>() / T::lit(a.len() as f64 - 1.0)
}

/// Sample Pearson correlation coefficient, clamped to `[−1, 1]`.
pub fn pearson<T: Real>(a: &[T], b: &[T]) -> Result<T, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatsError::TooShort { needed: 2, got: a.len() });
    }
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == T::zero() || sbb == T::zero() {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sab / (saa * sbb).sqrt()).max(-T::one()).min(T::one()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcfEss<T> {
    /// Autocorrelations at lags `0..=max_lag`.
    pub acf: Vec<T>,
    pub ess: T,
    /// Integrated autocorrelation time `N / ESS`.
    pub iact: T,
}

/// Autocorrelation function and effective sample size.
///
/// Autocorrelations are direct lag sums up to lag `min(N/5, 1000)`. The sum in
/// `1 + 2 Σ ρ_k` stops at the first pair `ρ_{2m} + ρ_{2m+1}` that is not
/// positive (initial positive sequence).
pub fn autocorrelation_ess<T: Real>(x: &[T]) -> Result<AcfEss<T>, StatsError> {
    let n = x.len();
    if n < 10 {
        return Err(StatsError::TooShort { needed: 10, got: n });
    }
    let m = mean(x);
    let c: Vec<T> = x.iter().map(|&v| v - m).collect();
    let c0: T = c.iter().map(|&v| v * v).sum();
    if c0 == T::zero() || !c0.is_finite() {
        return Err(StatsError::ZeroVariance);
    }
    let max_lag = (n / 5).min(1000);
    let mut acf = Vec::with_capacity(max_lag + 1);
    acf.push(T::one());
    for k in 1..=max_lag {
        let s: T = c[..n - k].iter().zip(&c[k..]).map(|(&a, &b)| a * b).sum();
        acf.push(s / c0);
    }
    let mut tau = -T::one();
    let mut k = 0;
    while k + 1 <= max_lag {
        let pair = acf[k] + acf[k + 1];
        if pair <= T::zero() {
            break;
        }
        tau += T::lit(2.0) * pair;
        k += 2;
    }
    let tau = tau.max(T::lit(1.0 / n as f64));
    Ok(AcfEss {
        acf,
        ess: T::lit(n as f64) / tau,
        iact: tau,
    })
}

/// ESS, falling back to `N` for a constant series.
pub fn ess_or_len<T: Real>(x: &[T]) -> T {
    match autocorrelation_ess(x) {
        Ok(r) => r.ess,
        Err(_) => T::lit(x.len() as f64),
    }
}

/// Kolmogorov-Smirnov distance between the empirical law of `x` and `cdf`.
pub fn ks_statistic<T: Real>(x: &[T], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v: Vec<f64> = x.iter().map(|t| t.to_f64_lossy()).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &y)| {
            let f = cdf(y);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic critical value of `D·√n` at significance `alpha`.
pub fn ks_critical(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub n_eff: f64,
    pub scaled: f64,
    pub critical: f64,
    pub passed: bool,
}

/// KS test with the statistic scaled by an effective sample count `n_eff`.
pub fn ks_test<T: Real>(x: &[T], cdf: impl Fn(f64) -> f64, n_eff: f64, alpha: f64) -> KsOutcome {
    let statistic = ks_statistic(x, cdf);
    let scaled = statistic * n_eff.sqrt();
    let critical = ks_critical(alpha);
    KsOutcome {
        statistic,
        n_eff,
        scaled,
        critical,
        passed: scaled <= critical,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    #[test]
    fn pearson_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(pearson(&a, &a).unwrap(), 1.0);
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        assert_eq!(pearson(&a, &neg).unwrap(), -1.0);
        let r = pearson(&a, &[1.0, 2.0, 3.0, 5.0]).unwrap();
        assert!((r - 0.9827).abs() < 5e-5, "{r}");
        assert_eq!(pearson(&a, &[1.0; 4]), Err(StatsError::ZeroVariance));
        assert!(pearson(&a, &[1.0]).is_err());
    }

    #[test]
    fn variance_bilinearity() {
        let mut rng = RngStream::new(1, 0);
        let a: Vec<f64> = (0..1000).map(|_| rng.standard_normal()).collect();
        let b: Vec<f64> = a.iter().map(|v| 0.7 * v + 0.3 * rng.standard_normal::<f64>()).collect();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let lhs = sample_variance(&d);
        let rhs = sample_variance(&a) + sample_variance(&b) - 2.0 * sample_covariance(&a, &b);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn iid_ess_close_to_n() {
        let mut rng = RngStream::new(2, 0);
        let x: Vec<f64> = (0..100_000).map(|_| rng.standard_normal()).collect();
        let r = autocorrelation_ess(&x).unwrap();
        assert_eq!(r.acf[0], 1.0);
        assert_eq!(r.acf.len(), 1001);
        assert!((r.ess / 1e5 - 1.0).abs() < 0.05, "{}", r.ess);
    }

    #[test]
    fn ar1_ess_matches_closed_form() {
        let mut rng = RngStream::new(3, 0);
        let mut x = Vec::with_capacity(100_000);
        let mut v = 0.0;
        for _ in 0..100_000 {
            v = 0.5 * v + rng.standard_normal::<f64>();
            x.push(v);
        }
        let r = autocorrelation_ess(&x).unwrap();
        let exact = 1e5 * 0.5 / 1.5;
        assert!((r.ess / exact - 1.0).abs() < 0.1, "{} vs {exact}", r.ess);
    }

    #[test]
    fn constant_series_is_flagged() {
        assert_eq!(autocorrelation_ess(&[2.0; 50]), Err(StatsError::ZeroVariance));
        assert_eq!(ess_or_len(&[2.0; 50]), 50.0);
        assert!(autocorrelation_ess(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn ks_critical_value() {
        assert!((ks_critical(0.01) - 1.6276).abs() < 1e-4);
    }

    #[test]
    fn ks_accepts_correct_law_and_rejects_shift() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let norm = Normal::new(0.0, 1.0).unwrap();
        let mut rng = RngStream::new(4, 0);
        let x: Vec<f64> = (0..20_000).map(|_| rng.standard_normal()).collect();
        assert!(ks_test(&x, |v| norm.cdf(v), x.len() as f64, 0.01).passed);
        let shifted: Vec<f64> = x.iter().map(|v| v + 0.1).collect();
        assert!(!ks_test(&shifted, |v| norm.cdf(v), x.len() as f64, 0.01).passed);
    }

    proptest! {
        #[test]
        fn pearson_is_bounded(v in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..40)) {
            let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            if let Ok(r) = pearson(&a, &b) {
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
