//! Monte Carlo phase-space averages over the invariant measure.
//!
//! Initial conditions are uniform on the dyadic lattice `(2^-64 Z / Z)^2` per
//! site. Cat maps permute that lattice, so trajectories are exact and the
//! sampling measure is exactly invariant. Sampling is split into fixed-size
//! batches, each driven by its own ChaCha stream, and merged in batch order, so
//! results do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::SiteObservable;
use crate::error::{Error, Result};
use crate::torus::{CatMapSpec, LatticePoint, TorusPoint};

/// Samples drawn per batch.
pub const BATCH: usize = 2048;

/// Running mean and second central moment (Chan et al. merge).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Deterministic RNG for batch `index` under `seed`.
pub fn batch_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives an independent sub-seed (splitmix64 finalizer).
pub fn sub_seed(seed: u64, k: u64) -> u64 {
    let mut z = seed ^ k.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn random_lattice_point<R: Rng>(rng: &mut R) -> LatticePoint {
    LatticePoint {
        q: rng.random(),
        p: rng.random(),
    }
}

/// Runs `per_sample` on `samples` uniform lattice configurations of `sites`
/// sites and accumulates the returned values. `per_sample` may return several
/// values; each slot gets its own [`Moments`].
pub fn sample_moments<F>(
    sites: usize,
    samples: u64,
    seed: u64,
    slots: usize,
    per_sample: F,
) -> Result<Vec<Moments>>
where
    F: Fn(&[LatticePoint], &mut [f64]) + Sync,
{
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be positive".into()));
    }
    let batches = samples.div_ceil(BATCH as u64);
    let partial: Vec<Vec<Moments>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(seed, b);
            let n = if b + 1 == batches {
                samples - b * BATCH as u64
            } else {
                BATCH as u64
            };
            let mut acc = vec![Moments::default(); slots];
            let mut x = vec![LatticePoint { q: 0, p: 0 }; sites];
            let mut out = vec![0.0; slots];
            for _ in 0..n {
                for xi in x.iter_mut() {
                    *xi = random_lattice_point(&mut rng);
                }
                per_sample(&x, &mut out);
                for (a, v) in acc.iter_mut().zip(&out) {
                    a.push(*v);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::default(); slots];
    for part in &partial {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    Ok(total)
}

/// Advances a lattice point by `t` steps (negative `t` uses the inverse map).
#[inline]
pub fn advance(mut x: LatticePoint, m: &CatMapSpec, t: i64) -> LatticePoint {
    if t >= 0 {
        for _ in 0..t {
            x = x.step(m);
        }
    } else {
        let inv = m.inverse();
        for _ in 0..(-t) {
            x = x.step(&inv);
        }
    }
    x
}

/// Per-site trajectories covering times `lo..=hi` of one initial condition.
pub struct SiteOrbits {
    lo: i64,
    orbits: Vec<Vec<TorusPoint>>,
}

impl SiteOrbits {
    pub fn new(x0: &[LatticePoint], m: &CatMapSpec, lo: i64, hi: i64) -> Self {
        assert!(lo <= 0 && hi >= 0);
        let inv = m.inverse();
        let orbits = x0
            .iter()
            .map(|&x| {
                let len = (hi - lo + 1) as usize;
                let mut v = vec![TorusPoint { q: 0.0, p: 0.0 }; len];
                let zero = (-lo) as usize;
                let mut y = x;
                v[zero] = y.to_torus();
                for slot in v.iter_mut().skip(zero + 1) {
                    y = y.step(m);
                    *slot = y.to_torus();
                }
                let mut y = x;
                for k in (0..zero).rev() {
                    y = y.step(&inv);
                    v[k] = y.to_torus();
                }
                v
            })
            .collect();
        SiteOrbits { lo, orbits }
    }

    /// Writes the configuration at site-wise times `t` into `buf`.
    #[inline]
    pub fn at(&self, t: &[i64], buf: &mut [TorusPoint]) {
        for ((slot, orbit), &ti) in buf.iter_mut().zip(&self.orbits).zip(t) {
            *slot = orbit[(ti - self.lo) as usize];
        }
    }

    /// Configuration at times `t + base` for every site.
    #[inline]
    pub fn at_offset(&self, base: i64, t: &[i64], buf: &mut [TorusPoint]) {
        for ((slot, orbit), &ti) in buf.iter_mut().zip(&self.orbits).zip(t) {
            *slot = orbit[(ti + base - self.lo) as usize];
        }
    }
}

/// Monte Carlo estimate of `C(u) = <w(phi_0^u x) w(x)>` with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub shift: Vec<i64>,
    pub value: f64,
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

/// Estimates the correlation function of `obs` at site-wise time offsets
/// `shift` under the uncoupled dynamics of `map`.
pub fn estimate_correlation<O: SiteObservable + ?Sized>(
    obs: &O,
    map: &CatMapSpec,
    shift: &[i64],
    samples: u64,
    seed: u64,
) -> Result<CorrelationEstimate> {
    let l = obs.sites();
    if shift.len() != l {
        return Err(Error::InvalidArgument(format!(
            "shift has {} components, system has {} sites",
            shift.len(),
            l
        )));
    }
    let moments = sample_moments(l, samples, seed, 1, |x, out| {
        let mut a = vec![TorusPoint { q: 0.0, p: 0.0 }; l];
        let mut b = vec![TorusPoint { q: 0.0, p: 0.0 }; l];
        for k in 0..l {
            a[k] = x[k].to_torus();
            b[k] = advance(x[k], map, shift[k]).to_torus();
        }
        out[0] = obs.eval(&b) * obs.eval(&a);
    })?;
    Ok(CorrelationEstimate {
        shift: shift.to_vec(),
        value: moments[0].mean,
        std_error: moments[0].std_error(),
        samples,
        seed,
    })
}

/// Monte Carlo mean of an observable with its standard error.
pub fn estimate_mean<O: SiteObservable + ?Sized>(
    obs: &O,
    samples: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    let l = obs.sites();
    let m = sample_moments(l, samples, seed, 1, |x, out| {
        let pts: Vec<TorusPoint> = x.iter().map(|p| p.to_torus()).collect();
        out[0] = obs.eval(&pts);
    })?;
    Ok((m[0].mean, m[0].std_error()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::SystemSpec;

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 * 0.3).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..40].iter().for_each(|&x| a.push(x));
        xs[40..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean - all.mean).abs() < 1e-12);
        assert!((a.variance() - all.variance()).abs() < 1e-12);
    }

    #[test]
    fn zero_samples_rejected() {
        let spec = SystemSpec::ring(2, 0.0);
        let r = estimate_correlation(&spec, &spec.map, &[0, 0], 0, 1);
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn zero_shift_is_mean_square() {
        let spec = SystemSpec::ring(2, 0.0);
        let c = estimate_correlation(&spec, &spec.map, &[0, 0], 100_000, 7).unwrap();
        // D = 2 cos(..), <D^2> = 2
        assert!((c.value - 2.0).abs() < 4.0 * c.std_error, "{c:?}");
        assert!(c.value > 0.0);
    }

    #[test]
    fn observable_mean_is_zero() {
        let spec = SystemSpec::ring(3, 0.0);
        let (m, e) = estimate_mean(&spec, 1_000_000, 11).unwrap();
        assert!(m.abs() < 4.0 * e, "{m} +- {e}");
    }

    #[test]
    fn site_orbits_agree_with_advance() {
        let m = CatMapSpec::ARNOLD;
        let x0 = [
            LatticePoint { q: 17, p: 99 },
            LatticePoint {
                q: u64::MAX / 3,
                p: 12345,
            },
        ];
        let orb = SiteOrbits::new(&x0, &m, -4, 6);
        let mut buf = [TorusPoint { q: 0.0, p: 0.0 }; 2];
        orb.at(&[-3, 5], &mut buf);
        assert_eq!(buf[0], advance(x0[0], &m, -3).to_torus());
        assert_eq!(buf[1], advance(x0[1], &m, 5).to_torus());
    }

    #[test]
    fn sub_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|k| sub_seed(42, k)).collect();
        assert_eq!(s.len(), 1000);
    }
}
