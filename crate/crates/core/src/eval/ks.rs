//! One-sample Kolmogorov–Smirnov test against a normal fitted to the data.
//!
//! The p-value uses the asymptotic Kolmogorov distribution even though the
//! mean and variance are estimated from the same samples. That makes the
//! test conservative (Lilliefors), which is accepted here.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const MIN_KS_SAMPLES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
}

pub fn ks_gaussian_pvalue(samples: &[f64]) -> Result<KsResult> {
    let n = samples.len();
    if n < MIN_KS_SAMPLES {
        return Err(Error::invalid(format!("KS test needs >= {MIN_KS_SAMPLES} samples, got {n}")));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    if !(var > 0.0) {
        return Err(Error::invalid("samples have zero variance"));
    }
    let std_dev = var.sqrt();
    let statistic = ks_statistic(samples, mean, std_dev)?;
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_pvalue(n, statistic),
        n,
        mean,
        std_dev,
    })
}

/// Same test against a fully specified normal `N(mean, std_dev²)`.
pub fn ks_normal_pvalue(samples: &[f64], mean: f64, std_dev: f64) -> Result<KsResult> {
    let n = samples.len();
    if n < MIN_KS_SAMPLES {
        return Err(Error::invalid(format!("KS test needs >= {MIN_KS_SAMPLES} samples, got {n}")));
    }
    let statistic = ks_statistic(samples, mean, std_dev)?;
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_pvalue(n, statistic),
        n,
        mean,
        std_dev,
    })
}

fn ks_statistic(samples: &[f64], mean: f64, std_dev: f64) -> Result<f64> {
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("samples contain non-finite values"));
    }
    let normal = Normal::new(mean, std_dev).map_err(|e| Error::invalid(e.to_string()))?;
    let n = samples.len();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / nf).max((i as f64 + 1.0) / nf - f)
        })
        .fold(0.0, f64::max))
}

/// `P(D_n > d) ≈ 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²nd²)`, clamped to `[0, 1]`.
pub fn kolmogorov_pvalue(n: usize, d: f64) -> f64 {
    let t = 2.0 * n as f64 * d * d;
    if t <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100_000u32 {
        let term = (-t * f64::from(k * k)).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-10 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::seeded_rng;
    use rand_distr::{Distribution, StandardNormal, Uniform};

    #[test]
    fn series_example() {
        let p = kolmogorov_pvalue(1000, 0.05);
        // Dominant term 2e^{-5}; the next one is 2e^{-20}.
        let expect = 2.0 * ((-5.0f64).exp() - (-20.0f64).exp());
        assert!((p - expect).abs() < 1e-15);
        assert!((p - 0.0135).abs() < 1e-4);
    }

    #[test]
    fn quantile_samples_fit_well() {
        let n = 500;
        let std = Normal::new(0.0, 1.0).unwrap();
        let q: Vec<f64> = (0..n).map(|i| std.inverse_cdf((i as f64 + 0.5) / n as f64)).collect();
        let r = ks_gaussian_pvalue(&q).unwrap();
        assert!(r.statistic < 0.01);
        assert!(r.p_value > 0.999);
    }

    #[test]
    fn preconditions() {
        assert!(ks_gaussian_pvalue(&[1.0; 100]).is_err());
        assert!(ks_gaussian_pvalue(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn rejects_uniform() {
        let mut rng = seeded_rng(1);
        let u = Uniform::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..5000).map(|_| u.sample(&mut rng)).collect();
        assert!(ks_gaussian_pvalue(&x).unwrap().p_value < 1e-3);
    }

    #[test]
    fn known_parameter_rejection_rate() {
        let mut rng = seeded_rng(3);
        let mut rejected = 0;
        for _ in 0..200 {
            let x: Vec<f64> = (0..300).map(|_| StandardNormal.sample(&mut rng)).collect();
            if ks_normal_pvalue(&x, 0.0, 1.0).unwrap().p_value < 0.05 {
                rejected += 1;
            }
        }
        assert!((2..=24).contains(&rejected), "{rejected}/200");
    }

    #[test]
    fn fitted_rejection_rate() {
        let mut rng = seeded_rng(2);
        let mut rejected = 0;
        for _ in 0..200 {
            let x: Vec<f64> = (0..300).map(|_| StandardNormal.sample(&mut rng)).collect();
            if ks_gaussian_pvalue(&x).unwrap().p_value < 0.05 {
                rejected += 1;
            }
        }
        // The fitted-parameter test is conservative, so the upper bound is
        // the informative one.
        assert!(rejected <= 24, "{rejected}/200");
    }
}
