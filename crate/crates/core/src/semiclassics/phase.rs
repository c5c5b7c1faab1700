//! First-order action differences along unperturbed orbit families.

use std::hash::{Hash, Hasher};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{SiteObservable, SystemSpec};
use crate::ergodic::{advance, batch_rng, random_lattice_point};
use crate::error::{Error, Result};
use crate::orbits::{shift_action_exact, OrbitFamily, PeriodicLattice, PeriodicPoint, ShiftVector};
use crate::torus::TorusPoint;

const PHASE_BATCH: u64 = 1024;

/// `sum_t d_eps W` along the `T`-step orbit starting at `start`.
fn orbit_sum(spec: &SystemSpec, start: &[PeriodicPoint], period: u32) -> f64 {
    let mut x = start.to_vec();
    let mut buf = vec![TorusPoint { q: 0.0, p: 0.0 }; x.len()];
    let mut sum = 0.0;
    for _ in 0..period {
        for (b, xi) in buf.iter_mut().zip(&x) {
            *b = xi.to_torus();
        }
        sum += spec.eval(&buf);
        for xi in x.iter_mut() {
            *xi = xi.step(&spec.map);
        }
    }
    sum
}

/// `Phi` between the periodic points `phi_0^r Gamma_0` and `phi_0^s Gamma_0`.
pub fn phase_difference(
    family: &OrbitFamily,
    r: &ShiftVector,
    s: &ShiftVector,
    spec: &SystemSpec,
) -> f64 {
    let t = family.period();
    let a = shift_action_exact(family, r, &spec.map);
    let b = shift_action_exact(family, s, &spec.map);
    orbit_sum(spec, &a, t) - orbit_sum(spec, &b, t)
}

/// `Phi_s(phi_0^r Gamma_0)`: the pair `(phi_0^r Gamma_0, phi_0^{r+s} Gamma_0)`.
pub fn relative_phase(
    family: &OrbitFamily,
    r: &ShiftVector,
    s: &ShiftVector,
    spec: &SystemSpec,
) -> f64 {
    phase_difference(family, r, &r.add(s), spec)
}

/// One draw of the rescaled phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    /// Hash of the family representatives; 0 in proxy mode.
    pub family: u64,
    pub r: Vec<u32>,
    pub s: Vec<u32>,
    pub phi: f64,
    pub phi_tilde: f64,
}

/// How periodic points are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// Exact when the period-`T` lattice fits in 128-bit arithmetic, else proxy.
    Auto,
    /// Uniform periodic points, i.e. weights `A^2`.
    Exact,
    /// Uniform initial conditions with `T`-step trajectory sums.
    Proxy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseSampleSet {
    pub period: u32,
    /// Mode actually used, never `Auto`.
    pub mode: SamplingMode,
    pub seed: u64,
    pub samples: Vec<PhaseSample>,
}

impl PhaseSampleSet {
    pub fn phi_tilde(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.phi_tilde).collect()
    }
}

fn family_hash(reps: &[PeriodicPoint]) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for r in reps {
        (r.num_q, r.num_p, r.den).hash(&mut h);
    }
    h.finish()
}

/// Draws periodic points with weight `A^2` and returns `Phi_s / sqrt(T)`.
pub fn sample_phase_distribution(
    spec: &SystemSpec,
    period: u32,
    s: &ShiftVector,
    budget: u64,
    seed: u64,
    mode: SamplingMode,
) -> Result<PhaseSampleSet> {
    spec.validate()?;
    if budget == 0 {
        return Err(Error::InvalidArgument(
            "sample budget must be positive".into(),
        ));
    }
    if s.r.len() != spec.l {
        return Err(Error::InvalidArgument(format!(
            "shift has {} components, system has {} sites",
            s.r.len(),
            spec.l
        )));
    }
    let lattice = match mode {
        SamplingMode::Proxy => None,
        SamplingMode::Exact => Some(PeriodicLattice::new(&spec.map, period)?),
        SamplingMode::Auto => PeriodicLattice::new(&spec.map, period).ok(),
    };
    let used = if lattice.is_some() {
        SamplingMode::Exact
    } else {
        SamplingMode::Proxy
    };
    let norm = (period as f64).sqrt();
    let batches = budget.div_ceil(PHASE_BATCH);
    let chunks: Vec<Vec<PhaseSample>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(seed, b);
            let n = if b + 1 == batches {
                budget - b * PHASE_BATCH
            } else {
                PHASE_BATCH
            };
            (0..n)
                .map(|_| match &lattice {
                    Some(lat) => exact_sample(spec, lat, s, norm, &mut rng),
                    None => proxy_sample(spec, period, s, norm, &mut rng),
                })
                .collect()
        })
        .collect();
    Ok(PhaseSampleSet {
        period,
        mode: used,
        seed,
        samples: chunks.into_iter().flatten().collect(),
    })
}

fn exact_sample<R: Rng>(
    spec: &SystemSpec,
    lat: &PeriodicLattice,
    s: &ShiftVector,
    norm: f64,
    rng: &mut R,
) -> PhaseSample {
    let period = lat.period;
    let m = &spec.map;
    let start: Vec<PeriodicPoint> = (0..spec.l).map(|_| lat.random_point(rng)).collect();
    let shifted: Vec<PeriodicPoint> = start
        .iter()
        .zip(&s.r)
        .map(|(x, &si)| x.advance(m, si))
        .collect();

    // walk the orbit once, tracking the lexicographic minimum per site
    let mut x = start.clone();
    let mut y = shifted;
    let mut reps = start.clone();
    let mut offset = vec![0u32; spec.l];
    let mut bx = vec![TorusPoint { q: 0.0, p: 0.0 }; spec.l];
    let mut by = bx.clone();
    let mut phi = 0.0;
    for t in 0..period {
        for k in 0..spec.l {
            bx[k] = x[k].to_torus();
            by[k] = y[k].to_torus();
            if x[k] < reps[k] {
                reps[k] = x[k];
                offset[k] = t;
            }
        }
        phi += spec.eval(&bx) - spec.eval(&by);
        for k in 0..spec.l {
            x[k] = x[k].step(m);
            y[k] = y[k].step(m);
        }
    }
    // start = psi^r rep with r = -offset mod primitive period
    let r = offset
        .iter()
        .zip(&start)
        .zip(&reps)
        .map(|((&o, st), rep)| {
            let mut pp = 1;
            let mut z = rep.step(m);
            while z != *rep {
                z = z.step(m);
                pp += 1;
            }
            let _ = st;
            (pp - o % pp) % pp
        })
        .collect();
    PhaseSample {
        family: family_hash(&reps),
        r,
        s: s.r.clone(),
        phi,
        phi_tilde: phi / norm,
    }
}

fn proxy_sample<R: Rng>(
    spec: &SystemSpec,
    period: u32,
    s: &ShiftVector,
    norm: f64,
    rng: &mut R,
) -> PhaseSample {
    let m = &spec.map;
    let mut x: Vec<_> = (0..spec.l).map(|_| random_lattice_point(rng)).collect();
    let mut y: Vec<_> = x
        .iter()
        .zip(&s.r)
        .map(|(&xi, &si)| advance(xi, m, si as i64))
        .collect();
    let mut bx = vec![TorusPoint { q: 0.0, p: 0.0 }; spec.l];
    let mut by = bx.clone();
    let mut phi = 0.0;
    for _ in 0..period {
        for k in 0..spec.l {
            bx[k] = x[k].to_torus();
            by[k] = y[k].to_torus();
        }
        phi += spec.eval(&bx) - spec.eval(&by);
        for k in 0..spec.l {
            x[k] = x[k].step(m);
            y[k] = y[k].step(m);
        }
    }
    PhaseSample {
        family: 0,
        r: vec![0; spec.l],
        s: s.r.clone(),
        phi,
        phi_tilde: phi / norm,
    }
}
