//! Quantized cat maps, coupled circuits and their numerical form factor.
//!
//! Convention: for `b = 1` the propagator is
//! `<k|u|j> = N^{-1/2} exp(i pi (a j^2 - 2 j k + d k^2) / N)`, the discretized
//! `exp(i W_cat / hbar)` kernel with `hbar = 1 / (2 pi N)`. It is periodic on
//! the grid only when `a N` and `d N` are even.

use std::io::Write;

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{Interaction, SystemSpec, Topology};
use crate::ergodic::batch_rng;
use crate::error::{Error, Result};
use crate::potts::{landmarks, Landmarks, SffPoint, SffPrediction};
use crate::torus::CatMapSpec;

pub type C64 = Complex<f64>;

pub const CONVENTION: &str = "kernel-b1-even";
pub const SERIES_SCHEMA: &str = "orbit-sff/quantum-series/v1";
/// Default memory budget in bytes.
pub const DEFAULT_BUDGET: u64 = 2 << 30;
/// Largest dimension diagonalized; above it traces use repeated products.
pub const DEFAULT_EIGEN_MAX_DIM: usize = 2048;

const TAU: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct QuantizedMap {
    pub n: usize,
    pub matrix: DMatrix<C64>,
    pub map: CatMapSpec,
    pub convention: &'static str,
}

pub fn quantize_subsystem(m: &CatMapSpec, n: usize) -> Result<QuantizedMap> {
    m.validate()?;
    if n < 2 {
        return Err(Error::Convention(format!("N must be at least 2, got {n}")));
    }
    if m.b != 1 {
        return Err(Error::Convention(format!(
            "convention {CONVENTION} needs b = 1, got b = {}",
            m.b
        )));
    }
    let ni = n as i64;
    if (m.a * ni).rem_euclid(2) != 0 || (m.d * ni).rem_euclid(2) != 0 {
        return Err(Error::Convention(format!(
            "convention {CONVENTION} needs a*N and d*N even (a = {}, d = {}, N = {n})",
            m.a, m.d
        )));
    }
    let norm = 1.0 / (n as f64).sqrt();
    let two_n = 2 * ni;
    let matrix = DMatrix::from_fn(n, n, |k, j| {
        let (k, j) = (k as i64, j as i64);
        // exponent in units of pi / N, reduced mod 2N before converting
        let e = (m.a * j * j - 2 * j * k + m.d * k * k).rem_euclid(two_n);
        C64::from_polar(norm, std::f64::consts::PI * e as f64 / n as f64)
    });
    Ok(QuantizedMap {
        n,
        matrix,
        map: *m,
        convention: CONVENTION,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum Coupling {
    Epsilon(f64),
    /// `epsilon = sqrt(Lambda) hbar / sqrt(T_H)`.
    Lambda(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    /// Number of random translation offsets.
    pub members: usize,
    /// Minimum moving-window width; 0 or 1 disables the window.
    #[serde(default = "default_window")]
    pub window_min: u32,
    /// Window width grows as `max(window_min, frac * t)`.
    #[serde(default = "default_window_frac")]
    pub window_frac: f64,
    /// Overwritten by the harness from the run seed.
    #[serde(default)]
    pub seed: u64,
    /// Members use offset 0 instead of random offsets.
    #[serde(default)]
    pub fixed_offsets: bool,
}

fn default_window() -> u32 {
    5
}

fn default_window_frac() -> f64 {
    0.1
}

impl EnsembleSpec {
    /// One realization, no window, zero offsets.
    pub fn single() -> Self {
        EnsembleSpec {
            members: 1,
            window_min: 0,
            window_frac: 0.0,
            seed: 0,
            fixed_offsets: true,
        }
    }

    pub fn width(&self, t: u32) -> u32 {
        if self.window_min <= 1 {
            1
        } else {
            self.window_min
                .max((self.window_frac * t as f64).round() as u32)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default)]
    pub map: CatMapSpec,
    #[serde(default)]
    pub interaction: Interaction,
    #[serde(default = "default_topology")]
    pub topology: Topology,
    pub coupling: Coupling,
    pub ensemble: EnsembleSpec,
    #[serde(default = "default_budget")]
    pub memory_budget: u64,
    #[serde(default = "default_eigen_max")]
    pub eigen_max_dim: usize,
}

fn default_topology() -> Topology {
    Topology::NearestNeighbourPeriodic
}

fn default_budget() -> u64 {
    DEFAULT_BUDGET
}

fn default_eigen_max() -> usize {
    DEFAULT_EIGEN_MAX_DIM
}

/// `hbar = 1 / (2 pi N)`.
pub fn hbar(n: usize) -> f64 {
    1.0 / (TAU * n as f64)
}

/// `epsilon(N) = sqrt(Lambda) hbar / sqrt(N^L)`.
pub fn epsilon_for_lambda(lambda: f64, n: usize, l: usize) -> f64 {
    lambda.sqrt() * hbar(n) / (n as f64).powf(l as f64 / 2.0)
}

impl CircuitSpec {
    pub fn new(l: usize, n: usize, coupling: Coupling, ensemble: EnsembleSpec) -> Self {
        CircuitSpec {
            l,
            n,
            map: CatMapSpec::ARNOLD,
            interaction: Interaction::default(),
            topology: default_topology(),
            coupling,
            ensemble,
            memory_budget: DEFAULT_BUDGET,
            eigen_max_dim: DEFAULT_EIGEN_MAX_DIM,
        }
    }

    pub fn dim(&self) -> Result<usize> {
        (self.n as u64)
            .checked_pow(self.l as u32)
            .filter(|&d| d <= u32::MAX as u64)
            .map(|d| d as usize)
            .ok_or_else(|| Error::Budget {
                needed: u64::MAX,
                budget: self.memory_budget,
            })
    }

    pub fn heisenberg_time(&self) -> f64 {
        (self.n as f64).powi(self.l as i32)
    }

    pub fn epsilon(&self) -> f64 {
        match self.coupling {
            Coupling::Epsilon(e) => e,
            Coupling::Lambda(lam) => epsilon_for_lambda(lam, self.n, self.l),
        }
    }

    pub fn lambda(&self) -> f64 {
        match self.coupling {
            Coupling::Lambda(lam) => lam,
            Coupling::Epsilon(e) => (e / hbar(self.n)).powi(2) * self.heisenberg_time(),
        }
    }

    pub fn system(&self) -> SystemSpec {
        SystemSpec {
            l: self.l,
            map: self.map,
            interaction: self.interaction,
            topology: self.topology,
            epsilon: self.epsilon(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system().validate()?;
        match self.coupling {
            Coupling::Epsilon(e) | Coupling::Lambda(e) if !(e >= 0.0 && e.is_finite()) => {
                return Err(Error::InvalidArgument(format!(
                    "coupling must be finite and >= 0, got {e}"
                )));
            }
            _ => {}
        }
        if self.ensemble.members == 0 {
            return Err(Error::InvalidArgument(
                "ensemble needs at least one member".into(),
            ));
        }
        let dim = self.dim()? as u64;
        // unitary, Schur workspace and a product buffer
        let needed = dim.saturating_mul(dim).saturating_mul(16 * 4);
        if needed > self.memory_budget {
            return Err(Error::Budget {
                needed,
                budget: self.memory_budget,
            });
        }
        Ok(())
    }
}

/// Site indices of basis state `idx`, site 0 most significant.
fn digits(mut idx: usize, n: usize, l: usize, out: &mut [f64]) {
    for k in (0..l).rev() {
        out[k] = (idx % n) as f64 / n as f64;
        idx /= n;
    }
}

/// Diagonal of `exp(i eps V(q + offsets) / hbar)` on the position grid.
pub fn coupling_operator(spec: &CircuitSpec, offsets: &[f64]) -> Result<Vec<C64>> {
    spec.validate()?;
    if offsets.len() != spec.l {
        return Err(Error::InvalidArgument(
            "one offset per site required".into(),
        ));
    }
    let eps = spec.epsilon();
    let sys = spec.system();
    let dim = spec.dim()?;
    let scale = eps / hbar(spec.n);
    let mut q = vec![0.0; spec.l];
    Ok((0..dim)
        .map(|idx| {
            if eps == 0.0 {
                return C64::new(1.0, 0.0);
            }
            digits(idx, spec.n, spec.l, &mut q);
            C64::from_polar(1.0, scale * sys.potential(&q, Some(offsets)))
        })
        .collect())
}

fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// `U = (u x ... x u) D`: kick first, then the single-site maps.
pub fn build_circuit(spec: &CircuitSpec, offsets: &[f64]) -> Result<DMatrix<C64>> {
    spec.validate()?;
    let u = quantize_subsystem(&spec.map, spec.n)?;
    let d = coupling_operator(spec, offsets)?;
    let mut full = u.matrix.clone();
    for _ in 1..spec.l {
        full = kron(&full, &u.matrix);
    }
    for (j, dj) in d.iter().enumerate() {
        if *dj != C64::new(1.0, 0.0) {
            for x in full.column_mut(j).iter_mut() {
                *x *= dj;
            }
        }
    }
    Ok(full)
}

pub fn eigenvalues(u: &DMatrix<C64>) -> Vec<C64> {
    let (_, t) = u.clone().schur().unpack();
    t.diagonal().iter().copied().collect()
}

/// `tr U^t` for `t = 1..=t_max`.
pub fn traces(u: &DMatrix<C64>, t_max: u32, use_eigen: bool) -> Vec<C64> {
    if use_eigen {
        let ev = eigenvalues(u);
        let mut pw = ev.clone();
        let mut out = Vec::with_capacity(t_max as usize);
        for _ in 0..t_max {
            out.push(pw.iter().sum());
            for (p, e) in pw.iter_mut().zip(&ev) {
                *p *= e;
            }
        }
        out
    } else {
        let mut p = u.clone();
        let mut out = Vec::with_capacity(t_max as usize);
        for t in 0..t_max {
            out.push(p.trace());
            if t + 1 < t_max {
                p = &p * u;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub n: usize,
    pub l: usize,
    pub epsilon: f64,
    pub lambda: f64,
    pub members: usize,
    pub window_min: u32,
    pub window_frac: f64,
    pub seed: u64,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SffSeries {
    pub times: Vec<u32>,
    pub k: Vec<f64>,
    pub err: Vec<f64>,
    pub meta: SeriesMeta,
}

impl SffSeries {
    pub fn heisenberg_time(&self) -> f64 {
        (self.meta.n as f64).powi(self.meta.l as i32)
    }

    pub fn points(&self) -> Vec<SffPoint> {
        let th = self.heisenberg_time();
        self.times
            .iter()
            .zip(&self.k)
            .map(|(&t, &k)| SffPoint {
                t: t as f64,
                tau: t as f64 / th,
                k,
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema={SERIES_SCHEMA} method={}", self.meta.method)
            .map_err(|e| Error::io("<series>", e))?;
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["t", "tau", "K", "err", "N", "L", "epsilon", "Lambda"])?;
        let th = self.heisenberg_time();
        for ((&t, &k), &e) in self.times.iter().zip(&self.k).zip(&self.err) {
            c.write_record([
                t.to_string(),
                (t as f64 / th).to_string(),
                k.to_string(),
                e.to_string(),
                self.meta.n.to_string(),
                self.meta.l.to_string(),
                self.meta.epsilon.to_string(),
                self.meta.lambda.to_string(),
            ])?;
        }
        c.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Windowed average of `raw[t-1]` around `t`.
fn window_average(raw: &[f64], t: u32, width: u32) -> f64 {
    let h = width / 2;
    let lo = t.saturating_sub(h).max(1);
    let hi = t + h;
    let slice = &raw[(lo - 1) as usize..hi as usize];
    slice.iter().sum::<f64>() / slice.len() as f64
}

/// Ensemble- and window-averaged `|tr U^t|^2` for `t = 1..=t_max`.
pub fn sff_numeric(spec: &CircuitSpec, t_max: u32) -> Result<SffSeries> {
    spec.validate()?;
    if t_max == 0 {
        return Err(Error::InvalidArgument("t_max must be >= 1".into()));
    }
    let ens = spec.ensemble;
    let reach = t_max + ens.width(t_max) / 2;
    let use_eigen = spec.dim()? <= spec.eigen_max_dim;
    let per_member: Vec<Vec<f64>> = (0..ens.members as u64)
        .into_par_iter()
        .map(|m| -> Result<Vec<f64>> {
            let offsets: Vec<f64> = if ens.fixed_offsets {
                vec![0.0; spec.l]
            } else {
                let mut rng = batch_rng(ens.seed, m);
                (0..spec.l).map(|_| rng.random::<f64>()).collect()
            };
            let u = build_circuit(spec, &offsets)?;
            let raw: Vec<f64> = traces(&u, reach, use_eigen)
                .iter()
                .map(|z| z.norm_sqr())
                .collect();
            Ok((1..=t_max)
                .map(|t| window_average(&raw, t, ens.width(t)))
                .collect())
        })
        .collect::<Result<_>>()?;
    let members = per_member.len() as f64;
    let mut k = vec![0.0; t_max as usize];
    let mut err = vec![0.0; t_max as usize];
    for i in 0..t_max as usize {
        let mean = per_member.iter().map(|v| v[i]).sum::<f64>() / members;
        let var = if per_member.len() > 1 {
            per_member
                .iter()
                .map(|v| (v[i] - mean).powi(2))
                .sum::<f64>()
                / (members - 1.0)
        } else {
            0.0
        };
        k[i] = mean;
        err[i] = (var / members).sqrt();
    }
    Ok(SffSeries {
        times: (1..=t_max).collect(),
        k,
        err,
        meta: SeriesMeta {
            n: spec.n,
            l: spec.l,
            epsilon: spec.epsilon(),
            lambda: spec.lambda(),
            members: ens.members,
            window_min: ens.window_min,
            window_frac: ens.window_frac,
            seed: ens.seed,
            method: if use_eigen { "eigen" } else { "product" }.into(),
        },
    })
}

/// Series for each `N` at fixed `Lambda`, up to `tau_max` in units of `T_H`.
pub fn lambda_sweep(
    template: &CircuitSpec,
    lambda: f64,
    n_list: &[usize],
    tau_max: f64,
) -> Result<Vec<SffSeries>> {
    n_list
        .iter()
        .map(|&n| {
            let spec = CircuitSpec {
                n,
                coupling: Coupling::Lambda(lambda),
                ..template.clone()
            };
            let t_max = ((tau_max * spec.heisenberg_time()).floor() as u32).max(1);
            sff_numeric(&spec, t_max)
        })
        .collect()
}

/// `kappa = K / T_H` at `tau`, linearly interpolated; `None` outside the series.
pub fn rescaled_at(series: &SffSeries, tau: f64) -> Option<(f64, f64)> {
    let th = series.heisenberg_time();
    let t = tau * th;
    let lo = t.floor() as u32;
    let i = series.times.iter().position(|&x| x == lo)?;
    if series.times[i] as f64 == t {
        return Some((series.k[i] / th, series.err[i] / th));
    }
    let j = i + 1;
    if j >= series.times.len() {
        return None;
    }
    let w = t - lo as f64;
    Some((
        ((1.0 - w) * series.k[i] + w * series.k[j]) / th,
        ((1.0 - w) * series.err[i] + w * series.err[j]) / th,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub t: f64,
    pub k_series: f64,
    pub err: f64,
    pub k_prediction: f64,
    pub ratio: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub mean_ratio: f64,
    pub ratio_std_error: f64,
    pub max_abs_deviation: f64,
    /// Mean of squared standardized deviations over rows with positive error.
    pub reduced_chi2: Option<f64>,
    pub series_landmarks: Landmarks,
    pub prediction_landmarks: Landmarks,
}

/// Compares a series with a prediction on their common times.
pub fn compare_points(
    series: &[SffPoint],
    err: &[f64],
    prediction: &SffPrediction,
) -> Result<CompareReport> {
    let mut rows = Vec::new();
    for (p, &e) in series.iter().zip(err) {
        if let Some(q) = prediction.points.iter().find(|q| q.t == p.t) {
            rows.push(CompareRow {
                t: p.t,
                k_series: p.k,
                err: e,
                k_prediction: q.k,
                ratio: p.k / q.k,
                deviation: (p.k - q.k).abs(),
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::DisjointGrids);
    }
    let n = rows.len() as f64;
    let mean_ratio = rows.iter().map(|r| r.ratio).sum::<f64>() / n;
    let ratio_var = if rows.len() > 1 {
        rows.iter()
            .map(|r| (r.ratio - mean_ratio).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    let with_err: Vec<f64> = rows
        .iter()
        .filter(|r| r.err > 0.0)
        .map(|r| (r.deviation / r.err).powi(2))
        .collect();
    Ok(CompareReport {
        mean_ratio,
        ratio_std_error: (ratio_var / n).sqrt(),
        max_abs_deviation: rows.iter().map(|r| r.deviation).fold(0.0, f64::max),
        reduced_chi2: if with_err.is_empty() {
            None
        } else {
            Some(with_err.iter().sum::<f64>() / with_err.len() as f64)
        },
        series_landmarks: landmarks(series),
        prediction_landmarks: landmarks(&prediction.points),
        rows,
    })
}

pub fn compare(series: &SffSeries, prediction: &SffPrediction) -> Result<CompareReport> {
    compare_points(&series.points(), &series.err, prediction)
}

/// Least-squares slope of `K` against `t` over `lo..=hi`.
pub fn ramp_slope(points: &[SffPoint], lo: f64, hi: f64) -> Option<f64> {
    let seg: Vec<&SffPoint> = points.iter().filter(|p| p.t >= lo && p.t <= hi).collect();
    if seg.len() < 2 {
        return None;
    }
    let n = seg.len() as f64;
    let mx = seg.iter().map(|p| p.t).sum::<f64>() / n;
    let my = seg.iter().map(|p| p.k).sum::<f64>() / n;
    let sxx: f64 = seg.iter().map(|p| (p.t - mx).powi(2)).sum();
    let sxy: f64 = seg.iter().map(|p| (p.t - mx) * (p.k - my)).sum();
    Some(sxy / sxx)
}

/// Number of `x in Z_N^2` with `M^t x = x mod N`.
pub fn fixed_points_mod_n(m: &CatMapSpec, t: u32, n: usize) -> usize {
    let ni = n as i64;
    let step = |(q, p): (i64, i64)| {
        (
            (m.a * q + m.b * p).rem_euclid(ni),
            (m.c * q + m.d * p).rem_euclid(ni),
        )
    };
    let mut count = 0;
    for q in 0..ni {
        for p in 0..ni {
            let mut x = (q, p);
            for _ in 0..t {
                x = step(x);
            }
            if x == (q, p) {
                count += 1;
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_unitarity_defect(u: &DMatrix<C64>) -> f64 {
        let p = u.adjoint() * u;
        let id = DMatrix::<C64>::identity(u.nrows(), u.ncols());
        (p - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn spec(l: usize, n: usize, eps: f64) -> CircuitSpec {
        CircuitSpec::new(l, n, Coupling::Epsilon(eps), EnsembleSpec::single())
    }

    #[test]
    fn quantized_map_is_unitary() {
        for n in [8, 16, 32] {
            let u = quantize_subsystem(&CatMapSpec::ARNOLD, n).unwrap();
            assert!(max_unitarity_defect(&u.matrix) < 1e-10);
            assert_eq!(eigenvalues(&u.matrix).len(), n);
        }
    }

    #[test]
    fn convention_errors() {
        assert!(matches!(
            quantize_subsystem(&CatMapSpec::ARNOLD, 7),
            Err(Error::Convention(_))
        ));
        let m = CatMapSpec::new(1, 2, 1, 3).unwrap();
        assert!(matches!(
            quantize_subsystem(&m, 8),
            Err(Error::Convention(_))
        ));
        assert!(quantize_subsystem(&CatMapSpec::ARNOLD, 1).is_err());
    }

    #[test]
    fn trace_modulus_counts_fixed_points() {
        // |tr u^t|^2 equals the number of period-t points of the grid map
        let m = CatMapSpec::ARNOLD;
        for n in [8, 10, 16] {
            let u = quantize_subsystem(&m, n).unwrap();
            let tr = traces(&u.matrix, 12, false);
            for (t, z) in tr.iter().enumerate() {
                let fp = fixed_points_mod_n(&m, t as u32 + 1, n) as f64;
                assert!(
                    (z.norm_sqr() - fp).abs() < 1e-8,
                    "N={n} t={} {} vs {fp}",
                    t + 1,
                    z.norm_sqr()
                );
            }
        }
    }

    #[test]
    fn zero_coupling_is_identity() {
        let s = spec(2, 4, 0.0);
        assert!(coupling_operator(&s, &[0.3, 0.1])
            .unwrap()
            .iter()
            .all(|z| *z == C64::new(1.0, 0.0)));
    }

    #[test]
    fn coupling_has_unit_modulus_and_classical_gradient() {
        let n = 64;
        let eps = 1e-3;
        let s = spec(2, n, eps);
        let d = coupling_operator(&s, &[0.0, 0.0]).unwrap();
        assert!(d.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        let sys = s.system();
        // phase difference along site 0 over one grid step, in units of hbar / dq
        for &(j0, j1) in &[(3usize, 17usize), (40, 5)] {
            let a = d[j0 * n + j1];
            let b = d[(j0 + 1) * n + j1];
            let dphi = (b / a).arg();
            let grad = dphi * hbar(n) * n as f64;
            let q = [(j0 as f64 + 0.5) / n as f64, j1 as f64 / n as f64];
            let g = eps * sys.potential_gradient(&q, None)[0];
            assert!((grad - g).abs() < 1e-3 * eps * 10.0, "{grad} vs {g}");
        }
    }

    #[test]
    fn circuit_matches_dense_kernel() {
        let (n, eps) = (4, 0.01);
        let s = spec(2, n, eps);
        let u = build_circuit(&s, &[0.0, 0.0]).unwrap();
        let m = CatMapSpec::ARNOLD;
        let nf = n as f64;
        for row in 0..n * n {
            for col in 0..n * n {
                let (k0, k1) = (row / n, row % n);
                let (j0, j1) = (col / n, col % n);
                let w = |k: usize, j: usize| {
                    let (k, j) = (k as f64 / nf, j as f64 / nf);
                    (m.d as f64 * k * k - 2.0 * j * k + m.a as f64 * j * j) / 2.0
                };
                let q = [j0 as f64 / nf, j1 as f64 / nf];
                let v = 2.0 * (TAU * (q[0] - q[1])).cos();
                let phase = (w(k0, j0) + w(k1, j1) + eps * v) / hbar(n);
                let expect = C64::from_polar(1.0 / nf, phase);
                assert!((u[(row, col)] - expect).norm() < 1e-10);
            }
        }
        assert!(max_unitarity_defect(&u) < 1e-10);
    }

    #[test]
    fn zero_coupling_trace_factorizes() {
        let s = spec(2, 8, 0.0);
        let u = build_circuit(&s, &[0.0, 0.0]).unwrap();
        let sub = quantize_subsystem(&CatMapSpec::ARNOLD, 8).unwrap();
        let a = traces(&u, 20, false);
        let b = traces(&sub.matrix, 20, false);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y * y).norm() < 1e-9);
        }
    }

    #[test]
    fn eigen_and_product_traces_agree() {
        let s = spec(2, 6, 0.02);
        let u = build_circuit(&s, &[0.1, 0.7]).unwrap();
        let a = traces(&u, 30, true);
        let b = traces(&u, 30, false);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-8);
        }
    }

    #[test]
    fn budget_checked_before_allocation() {
        let mut s = spec(3, 64, 0.0);
        s.memory_budget = 1 << 20;
        assert!(matches!(
            build_circuit(&s, &[0.0; 3]),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn epsilon_scaling() {
        let e1 = epsilon_for_lambda(2.0, 8, 2);
        let e2 = epsilon_for_lambda(2.0, 16, 2);
        assert!((e1 / e2 - 2f64.powi(2)).abs() < 1e-12);
        assert_eq!(epsilon_for_lambda(0.0, 12, 2), 0.0);
        let s = CircuitSpec::new(2, 8, Coupling::Lambda(3.0), EnsembleSpec::single());
        assert!((s.lambda() - 3.0).abs() < 1e-15);
        let back = CircuitSpec::new(2, 8, Coupling::Epsilon(s.epsilon()), EnsembleSpec::single());
        assert!((back.lambda() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn window_widths() {
        let e = EnsembleSpec {
            members: 1,
            window_min: 5,
            window_frac: 0.1,
            seed: 0,
            fixed_offsets: false,
        };
        assert_eq!(e.width(3), 5);
        assert_eq!(e.width(100), 10);
        assert_eq!(EnsembleSpec::single().width(100), 1);
        let raw = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(window_average(&raw, 1, 5), 2.0);
        assert_eq!(window_average(&raw, 3, 5), 3.0);
        assert_eq!(window_average(&raw, 4, 1), 4.0);
    }

    #[test]
    fn self_comparison_is_exact() {
        let p = crate::potts::PottsParams::from_chi(2, 16.0, 0.5).unwrap();
        let times: Vec<f64> = (1..=20).map(|t| t as f64).collect();
        let pred = crate::potts::closed_form_sff(&p, &times).unwrap();
        let r = compare_points(&pred.points, &vec![0.0; 20], &pred).unwrap();
        assert_eq!(r.max_abs_deviation, 0.0);
        assert_eq!(r.mean_ratio, 1.0);
        let other = crate::potts::closed_form_sff(&p, &[100.0]).unwrap();
        assert!(matches!(
            compare_points(&pred.points, &vec![0.0; 20], &other),
            Err(Error::DisjointGrids)
        ));
    }

    #[test]
    fn numeric_sff_is_nonnegative_and_factorizes() {
        let s = spec(2, 8, 0.0);
        let series = sff_numeric(&s, 24).unwrap();
        let sub = quantize_subsystem(&CatMapSpec::ARNOLD, 8).unwrap();
        let b = traces(&sub.matrix, 24, false);
        for (k, z) in series.k.iter().zip(&b) {
            assert!(*k >= 0.0);
            let expect = z.norm_sqr().powi(2);
            assert!((k - expect).abs() < 1e-8 * expect.max(1.0));
        }
    }
}
