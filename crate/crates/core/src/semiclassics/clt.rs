//! Moments and Kolmogorov-Smirnov distance of phase samples.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Minimum sample count accepted by [`clt_diagnostics`].
pub const MIN_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub count: usize,
    pub mean: f64,
    /// Sample variance, used as the width of the reference normal.
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Sup distance between the empirical CDF and `N(0, variance)`.
    pub ks_distance: f64,
    /// All samples zero; the other statistics are then reported as 0.
    pub degenerate: bool,
}

/// Distance at which two KS statistics from `n` samples each differ at the 5% level.
pub fn ks_tolerance(n: usize) -> f64 {
    1.36 * (2.0 / n as f64).sqrt()
}

pub fn clt_diagnostics(samples: &[f64]) -> Result<CltReport> {
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_SAMPLES} samples, got {n}"
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("samples must be finite".into()));
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    if m2 == 0.0 {
        return Ok(CltReport {
            count: n,
            mean,
            variance: 0.0,
            skewness: 0.0,
            excess_kurtosis: 0.0,
            ks_distance: 0.0,
            degenerate: true,
        });
    }
    let (m2, m3, m4) = (m2 / nf, m3 / nf, m4 / nf);
    let variance = m2 * nf / (nf - 1.0);
    let normal = Normal::new(0.0, variance.sqrt())
        .map_err(|e| Error::InvalidArgument(format!("reference normal: {e}")))?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ks: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = normal.cdf(x);
        ks = ks.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    Ok(CltReport {
        count: n,
        mean,
        variance,
        skewness: m3 / m2.powf(1.5),
        excess_kurtosis: m4 / (m2 * m2) - 3.0,
        ks_distance: ks.clamp(0.0, 1.0),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodic::batch_rng;
    use rand::Rng;

    // Box-Muller
    fn normal_samples<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u: f64 = 1.0 - rng.random::<f64>();
                let v: f64 = rng.random();
                (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
            })
            .collect()
    }

    #[test]
    fn standard_normal_passes() {
        let mut rng = batch_rng(3, 0);
        let xs = normal_samples(&mut rng, 100_000);
        let r = clt_diagnostics(&xs).unwrap();
        assert!(r.ks_distance < 0.01, "{r:?}");
        assert!(r.skewness.abs() < 0.05);
        assert!(r.excess_kurtosis.abs() < 0.1);
        assert!(!r.degenerate);
    }

    #[test]
    fn zeros_are_degenerate() {
        let r = clt_diagnostics(&vec![0.0; 2000]).unwrap();
        assert!(r.degenerate);
        assert!(r.ks_distance.is_finite());
    }

    #[test]
    fn too_few_samples() {
        assert!(clt_diagnostics(&[1.0; 10]).is_err());
    }

    #[test]
    fn uniform_has_known_moments() {
        // uniform on [-1, 1]: excess kurtosis -1.2
        let xs: Vec<f64> = (0..20_001).map(|i| -1.0 + i as f64 / 10_000.0).collect();
        let r = clt_diagnostics(&xs).unwrap();
        assert!(r.skewness.abs() < 1e-10);
        assert!((r.excess_kurtosis + 1.2).abs() < 1e-3);
        assert!(r.ks_distance > 0.03);
    }
}
