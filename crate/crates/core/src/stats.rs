//! Normal and chi-square distribution helpers and small summary statistics.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc_inv;

/// Standard normal CDF, `Φ(x) = erfc(-x/√2)/2`. Accurate in both tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `1 − Φ(x)` without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `Φ⁻¹(p)` for `p ∈ (0, 1)`.
pub fn normal_quantile(p: f64) -> f64 {
    let x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    // one Newton step against the more accurate CDF
    let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if density > 0.0 {
        let err = if x < 0.0 { normal_cdf(x) - p } else { (1.0 - p) - normal_sf(x) };
        x - err / density
    } else {
        x
    }
}

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: usize) -> f64 {
    if x.is_infinite() && x > 0.0 {
        return 0.0;
    }
    let dist = ChiSquared::new(df as f64).expect("df must be positive");
    dist.sf(x)
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Variance with divisor `n`.
pub fn population_variance(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

/// Studentised mean `√n · mean / sd` (divisor-n sd). Zero whenever all values
/// are equal, following `0/0 := 0`.
pub fn studentized_mean(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 || v.iter().all(|x| *x == v[0]) {
        return (0.0, 0.0);
    }
    let sd = population_variance(v).sqrt();
    if sd == 0.0 {
        return (0.0, 0.0);
    }
    ((n as f64).sqrt() * mean(v) / sd, sd)
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `sample` and Φ.
pub fn ks_distance_to_normal(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = normal_cdf(*x);
            let lo = f - i as f64 / n;
            let hi = (i + 1) as f64 / n - f;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}
