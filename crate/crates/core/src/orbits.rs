//! Exact periodic points of cat maps and the orbit families built from them.
//!
//! The period-`T` points of `x -> M x mod 1` are the rational lattice
//! `(M^T - I)^{-1} Z^2 mod 1`. We enumerate its cosets through the Hermite
//! normal form of `M^T - I` and keep every coordinate as an exact numerator
//! over the common denominator `|det(M^T - I)|`.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classical::SystemSpec;
use crate::error::{Error, Result};
use crate::torus::{CatMapSpec, TorusPoint};

type Mat = [[i128; 2]; 2];

fn mat_mul(x: &Mat, y: &Mat, period: u32) -> Result<Mat> {
    let mut out = [[0i128; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let a = x[i][0].checked_mul(y[0][j]);
            let b = x[i][1].checked_mul(y[1][j]);
            out[i][j] = match (a, b) {
                (Some(a), Some(b)) => a.checked_add(b).ok_or(Error::Overflow { period })?,
                _ => return Err(Error::Overflow { period }),
            };
        }
    }
    Ok(out)
}

/// `M^t` with overflow detection.
pub fn matrix_power(m: &CatMapSpec, t: u32) -> Result<Mat> {
    let base = [[m.a as i128, m.b as i128], [m.c as i128, m.d as i128]];
    let mut acc: Mat = [[1, 0], [0, 1]];
    for _ in 0..t {
        acc = mat_mul(&acc, &base, t)?;
    }
    Ok(acc)
}

/// `tr M^t - 2`, whose modulus counts the period-`t` points.
pub fn trace_minus_two(m: &CatMapSpec, t: u32) -> Result<i128> {
    let p = matrix_power(m, t)?;
    Ok(p[0][0] + p[1][1] - 2)
}

fn ext_gcd(a: i128, b: i128) -> (i128, i128, i128) {
    if b == 0 {
        if a < 0 {
            (-a, -1, 0)
        } else {
            (a, 1, 0)
        }
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        (g, y, x - a.div_euclid(b) * y)
    }
}

/// A period-`T` point with coordinates `num / den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PeriodicPoint {
    pub num_q: i128,
    pub num_p: i128,
    pub den: i128,
    pub period: u32,
}

impl PeriodicPoint {
    /// One map step in exact arithmetic.
    pub fn step(&self, m: &CatMapSpec) -> PeriodicPoint {
        let (a, b, c, d) = (m.a as i128, m.b as i128, m.c as i128, m.d as i128);
        PeriodicPoint {
            num_q: (a * self.num_q + b * self.num_p).rem_euclid(self.den),
            num_p: (c * self.num_q + d * self.num_p).rem_euclid(self.den),
            ..*self
        }
    }

    pub fn advance(&self, m: &CatMapSpec, t: u32) -> PeriodicPoint {
        let mut x = *self;
        for _ in 0..t {
            x = x.step(m);
        }
        x
    }

    pub fn to_torus(&self) -> TorusPoint {
        TorusPoint {
            q: self.num_q as f64 / self.den as f64,
            p: self.num_p as f64 / self.den as f64,
        }
    }

    fn key(&self) -> (i128, i128) {
        (self.num_q, self.num_p)
    }
}

/// The group of period-`T` points of one cat map.
#[derive(Debug, Clone)]
pub struct PeriodicLattice {
    pub map: CatMapSpec,
    pub period: u32,
    /// `|det(M^T - I)|`, the number of points and their common denominator.
    pub den: i128,
    adj: Mat,
    det_sign: i128,
    h11: i128,
    h12: i128,
    h22: i128,
}

impl PeriodicLattice {
    pub fn new(map: &CatMapSpec, period: u32) -> Result<Self> {
        map.validate()?;
        if period == 0 {
            return Err(Error::InvalidArgument("period must be >= 1".into()));
        }
        let p = matrix_power(map, period)?;
        let a = [[p[0][0] - 1, p[0][1]], [p[1][0], p[1][1] - 1]];
        let det = a[0][0]
            .checked_mul(a[1][1])
            .zip(a[0][1].checked_mul(a[1][0]))
            .and_then(|(x, y)| x.checked_sub(y))
            .ok_or(Error::Overflow { period })?;
        debug_assert!(det != 0);
        let den = det.abs();
        let adj = [[a[1][1], -a[0][1]], [-a[1][0], a[0][0]]];

        // numerators are adj * n with 0 <= n < den, then a*q + b*p on top
        let biggest = adj.iter().flatten().map(|v| v.abs()).max().unwrap_or(0);
        let coeff = map
            .a
            .abs()
            .max(map.b.abs())
            .max(map.c.abs())
            .max(map.d.abs()) as i128;
        biggest
            .checked_mul(den)
            .and_then(|v| v.checked_mul(2))
            .and_then(|_| den.checked_mul(2 * coeff))
            .ok_or(Error::Overflow { period })?;

        // Column Hermite form: A V = [[det/g, h12], [0, g]]
        let (g, x, y) = ext_gcd(a[1][0], a[1][1]);
        let mut h11 = det / g;
        let h12raw = a[0][0] * x + a[0][1] * y;
        if h11 < 0 {
            h11 = -h11;
        }
        let h12 = h12raw.rem_euclid(h11);
        Ok(PeriodicLattice {
            map: *map,
            period,
            den,
            adj,
            det_sign: det.signum(),
            h11,
            h12,
            h22: g,
        })
    }

    pub fn count(&self) -> i128 {
        self.den
    }

    /// Point for the coset representative `(n1, n2)`, `0 <= n1 < h11`, `0 <= n2 < h22`.
    fn point_for(&self, n1: i128, n2: i128) -> PeriodicPoint {
        let s = self.det_sign;
        let nq = s * (self.adj[0][0] * n1 + self.adj[0][1] * n2);
        let np = s * (self.adj[1][0] * n1 + self.adj[1][1] * n2);
        PeriodicPoint {
            num_q: nq.rem_euclid(self.den),
            num_p: np.rem_euclid(self.den),
            den: self.den,
            period: self.period,
        }
    }

    /// Every period-`T` point, sorted lexicographically.
    pub fn points(&self) -> Vec<PeriodicPoint> {
        let mut out = Vec::with_capacity(self.den as usize);
        for n2 in 0..self.h22 {
            for n1 in 0..self.h11 {
                out.push(self.point_for(n1, n2));
            }
        }
        out.sort_unstable();
        out
    }

    /// A uniformly distributed period-`T` point.
    pub fn random_point<R: Rng>(&self, rng: &mut R) -> PeriodicPoint {
        let n1 = rng.random_range(0..self.h11 as u128) as i128;
        let n2 = rng.random_range(0..self.h22 as u128) as i128;
        self.point_for(n1, n2)
    }

    /// Hermite basis `(h11, h12, h22)` of `(M^T - I) Z^2`.
    pub fn hermite_form(&self) -> (i128, i128, i128) {
        (self.h11, self.h12, self.h22)
    }
}

/// All solutions of `(M^T - I) x = 0 mod 1`.
pub fn enumerate_periodic_points(period: u32, m: &CatMapSpec) -> Result<Vec<PeriodicPoint>> {
    let lat = PeriodicLattice::new(m, period)?;
    if lat.den > (1 << 32) {
        return Err(Error::InvalidArgument(format!(
            "{} period-{period} points are too many to enumerate",
            lat.den
        )));
    }
    Ok(lat.points())
}

/// A periodic orbit identified by its lexicographically smallest point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubsystemOrbit {
    pub representative: PeriodicPoint,
    pub period: u32,
    pub primitive_period: u32,
}

impl SubsystemOrbit {
    /// The points of the cycle, starting at the representative.
    pub fn cycle(&self, m: &CatMapSpec) -> Vec<PeriodicPoint> {
        let mut out = Vec::with_capacity(self.primitive_period as usize);
        let mut x = self.representative;
        for _ in 0..self.primitive_period {
            out.push(x);
            x = x.step(m);
        }
        out
    }
}

/// Partitions a complete period-`T` set into cycles.
pub fn group_into_orbits(
    points: &[PeriodicPoint],
    period: u32,
    m: &CatMapSpec,
) -> Result<Vec<SubsystemOrbit>> {
    let index: HashMap<(i128, i128), usize> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.key(), i))
        .collect();
    let mut seen = vec![false; points.len()];
    let mut orbits = Vec::new();
    for start in 0..points.len() {
        if seen[start] {
            continue;
        }
        let mut rep = points[start];
        let mut x = points[start];
        let mut len = 0u32;
        loop {
            let i = *index.get(&x.key()).ok_or_else(|| {
                Error::Inconsistent(format!(
                    "image ({}, {})/{} of a listed point is missing",
                    x.num_q, x.num_p, x.den
                ))
            })?;
            if seen[i] {
                if i != start {
                    return Err(Error::Inconsistent("cycles overlap".into()));
                }
                break;
            }
            seen[i] = true;
            if x.key() < rep.key() {
                rep = x;
            }
            len += 1;
            if len > period {
                return Err(Error::Inconsistent(format!(
                    "cycle longer than period {period}"
                )));
            }
            x = x.step(m);
        }
        if period % len != 0 {
            return Err(Error::Inconsistent(format!(
                "cycle length {len} does not divide {period}"
            )));
        }
        orbits.push(SubsystemOrbit {
            representative: rep,
            period,
            primitive_period: len,
        });
    }
    orbits.sort_by_key(|o| o.representative.key());
    Ok(orbits)
}

/// Element of `Z_T^L`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShiftVector {
    pub r: Vec<u32>,
    pub period: u32,
}

impl ShiftVector {
    pub fn new(components: &[i64], period: u32) -> Self {
        ShiftVector {
            r: components
                .iter()
                .map(|&c| c.rem_euclid(period as i64) as u32)
                .collect(),
            period,
        }
    }

    pub fn zero(l: usize, period: u32) -> Self {
        ShiftVector {
            r: vec![0; l],
            period,
        }
    }

    /// `t * (1, ..., 1)`
    pub fn diagonal(l: usize, t: i64, period: u32) -> Self {
        ShiftVector::new(&vec![t; l], period)
    }

    pub fn add(&self, other: &ShiftVector) -> ShiftVector {
        ShiftVector {
            r: self
                .r
                .iter()
                .zip(&other.r)
                .map(|(a, b)| (a + b) % self.period)
                .collect(),
            period: self.period,
        }
    }

    pub fn neg(&self) -> ShiftVector {
        ShiftVector {
            r: self
                .r
                .iter()
                .map(|&a| (self.period - a) % self.period)
                .collect(),
            period: self.period,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        self.r.windows(2).all(|w| w[0] == w[1])
    }

    pub fn as_i64(&self) -> Vec<i64> {
        self.r.iter().map(|&c| c as i64).collect()
    }
}

/// A tuple of `L` subsystem orbits of common period.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrbitFamily {
    pub reps: Vec<SubsystemOrbit>,
}

impl OrbitFamily {
    pub fn period(&self) -> u32 {
        self.reps[0].period
    }

    /// Number of distinct many-body periodic points in the family.
    pub fn point_count(&self) -> u64 {
        self.reps
            .iter()
            .map(|o| o.primitive_period as u64)
            .product()
    }
}

/// Lazy Cartesian product of subsystem orbit lists.
pub struct FamilyIter {
    orbits: Arc<Vec<SubsystemOrbit>>,
    idx: Vec<usize>,
    done: bool,
}

impl Iterator for FamilyIter {
    type Item = OrbitFamily;

    fn next(&mut self) -> Option<OrbitFamily> {
        if self.done {
            return None;
        }
        let fam = OrbitFamily {
            reps: self.idx.iter().map(|&i| self.orbits[i]).collect(),
        };
        // odometer, last site fastest
        let mut k = self.idx.len();
        loop {
            if k == 0 {
                self.done = true;
                break;
            }
            k -= 1;
            self.idx[k] += 1;
            if self.idx[k] < self.orbits.len() {
                break;
            }
            self.idx[k] = 0;
        }
        Some(fam)
    }
}

/// All orbit families of period `T` for a homogeneous system.
pub fn family_iterator(spec: &SystemSpec, period: u32) -> Result<FamilyIter> {
    let points = enumerate_periodic_points(period, &spec.map)?;
    let orbits = group_into_orbits(&points, period, &spec.map)?;
    Ok(FamilyIter {
        done: orbits.is_empty() || spec.l == 0,
        orbits: Arc::new(orbits),
        idx: vec![0; spec.l],
    })
}

/// `phi_0^r Gamma_0` as exact points.
pub fn shift_action_exact(
    family: &OrbitFamily,
    r: &ShiftVector,
    m: &CatMapSpec,
) -> Vec<PeriodicPoint> {
    family
        .reps
        .iter()
        .zip(&r.r)
        .map(|(o, &ri)| o.representative.advance(m, ri % o.primitive_period))
        .collect()
}

/// `phi_0^r Gamma_0`
pub fn shift_action(family: &OrbitFamily, r: &ShiftVector, m: &CatMapSpec) -> Vec<TorusPoint> {
    shift_action_exact(family, r, m)
        .iter()
        .map(|p| p.to_torus())
        .collect()
}

/// `A^2 = 1 / |tr M^T - 2|`, the same for every period-`T` point.
pub fn stability_amplitude_sq(period: u32, m: &CatMapSpec) -> Result<f64> {
    Ok(1.0 / trace_minus_two(m, period)?.abs() as f64)
}

/// Sum of `A^2` over all period-`T` points (compensated summation).
pub fn sum_rule_check(period: u32, m: &CatMapSpec) -> Result<f64> {
    let points = enumerate_periodic_points(period, m)?;
    let a2 = stability_amplitude_sq(period, m)?;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for _ in &points {
        let t = sum + a2;
        if sum.abs() >= a2.abs() {
            comp += (sum - t) + a2;
        } else {
            comp += (a2 - t) + sum;
        }
        sum = t;
    }
    Ok(sum + comp)
}

/// Writes `T,num_q,num_p,den,primitive_period`, one row per orbit.
pub fn write_orbit_inventory<W: Write>(
    out: &mut csv::Writer<W>,
    orbits: &[SubsystemOrbit],
) -> Result<()> {
    for o in orbits {
        out.write_record([
            o.period.to_string(),
            o.representative.num_q.to_string(),
            o.representative.num_p.to_string(),
            o.representative.den.to_string(),
            o.primitive_period.to_string(),
        ])?;
    }
    Ok(())
}
