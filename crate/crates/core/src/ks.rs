//! Kolmogorov-Smirnov statistics with asymptotic critical values.

use std::cmp::Ordering;

/// Asymptotic KS coefficient `c(alpha) = sqrt(-ln(alpha / 2) / 2)`.
/// `c(0.01) = 1.6276`.
pub fn ks_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

/// Two-sample critical value `c(alpha) * sqrt((n + m) / (n * m))`.
pub fn two_sample_critical(alpha: f64, n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    ks_coefficient(alpha) * ((n + m) / (n * m)).sqrt()
}

/// One-sample critical value `c(alpha) / sqrt(n)`.
pub fn one_sample_critical(alpha: f64, n: usize) -> f64 {
    ks_coefficient(alpha) / (n as f64).sqrt()
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    v
}

/// `sup_x |F_a(x) - F_b(x)|` over the two empirical CDFs. Ties are handled
/// by advancing both samples past each distinct value before comparing.
pub fn two_sample_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
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

/// `sup_x |F_n(x) - F(x)|` against a continuous CDF.
pub fn one_sample_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    if sample.is_empty() {
        return 0.0;
    }
    let s = sorted(sample);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

pub fn uniform_cdf(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Standard normal CDF via `erfc`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_at_one_percent() {
        assert!((ks_coefficient(0.01) - 1.628).abs() < 5e-4);
        assert!((ks_coefficient(0.05) - 1.358).abs() < 5e-4);
    }

    #[test]
    fn two_sample_brute_force() {
        // oracle: evaluate both ECDFs on every pooled point
        let a = [0.1, 0.4, 0.4, 0.9, 1.3];
        let b = [0.2, 0.4, 0.5, 0.5];
        let ecdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
        let brute = a
            .iter()
            .chain(b.iter())
            .map(|&x| (ecdf(&a, x) - ecdf(&b, x)).abs())
            .fold(0.0f64, f64::max);
        assert!((two_sample_statistic(&a, &b) - brute).abs() < 1e-15);
    }

    #[test]
    fn two_sample_degenerate_cases() {
        assert_eq!(two_sample_statistic(&[1.0; 5], &[1.0; 7]), 0.0);
        assert_eq!(two_sample_statistic(&[1.0; 5], &[0.0; 7]), 1.0);
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
        assert!((normal_cdf(-1.0) - 0.15865525393145707).abs() < 1e-12);
    }

    #[test]
    fn one_sample_against_uniform() {
        // a single point at 0.5: max(1 - 0.5, 0.5 - 0) = 0.5
        assert_eq!(one_sample_statistic(&[0.5], uniform_cdf), 0.5);
        let grid: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((one_sample_statistic(&grid, uniform_cdf) - 0.005).abs() < 1e-12);
    }
}
