//! Analytic SFF predictions: transfer matrix, closed form, scaled limit and the
//! deviation bound for slowly decaying correlations.

use std::io::Write;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semiclassics::{TableKind, VarianceEntry, VarianceTable};

/// Largest Thouless time returned before reporting the value as undefined.
pub const THOULESS_CAP: f64 = 1e12;

pub const PREDICTION_SCHEMA: &str = "orbit-sff/prediction/v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PottsParams {
    #[serde(rename = "L")]
    pub l: u32,
    /// Heisenberg time; any positive real in analytic mode.
    pub t_h: f64,
    /// Coupling parameter; `+inf` encodes the fully damped limit.
    pub lambda: f64,
    /// Per-bond variance of asynchronous shifts.
    pub sigma2_phi: f64,
}

impl PottsParams {
    /// Parameters with `sigma2_phi = 1` and the given damping factor.
    pub fn from_chi(l: u32, t_h: f64, chi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&chi) {
            return Err(Error::InvalidArgument(format!(
                "chi must lie in [0, 1], got {chi}"
            )));
        }
        let p = PottsParams {
            l,
            t_h,
            lambda: -2.0 * chi.ln(),
            sigma2_phi: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::InvalidArgument("L must be at least 1".into()));
        }
        if !(self.t_h > 0.0 && self.t_h.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "T_H must be positive and finite, got {}",
                self.t_h
            )));
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "Lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.sigma2_phi >= 0.0 && self.sigma2_phi.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma2_phi must be finite and >= 0, got {}",
                self.sigma2_phi
            )));
        }
        if self.lambda.is_infinite() && self.sigma2_phi == 0.0 {
            return Err(Error::InvalidArgument(
                "infinite Lambda needs sigma2_phi > 0".into(),
            ));
        }
        Ok(())
    }

    /// `ln chi = -Lambda sigma2_phi / 2`.
    pub fn ln_chi(&self) -> f64 {
        if self.sigma2_phi == 0.0 {
            0.0
        } else {
            -0.5 * self.lambda * self.sigma2_phi
        }
    }

    pub fn chi(&self) -> f64 {
        self.ln_chi().exp()
    }

    pub fn tau(&self, t: f64) -> f64 {
        t / self.t_h
    }
}

/// `exp(-Lambda tau sigma2 / 2)` with `0 * inf` read as 0.
fn damping(lambda: f64, tau: f64, sigma2: f64) -> f64 {
    if sigma2 == 0.0 || lambda == 0.0 {
        1.0
    } else {
        (-0.5 * lambda * tau * sigma2).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionMode {
    TransferMatrix,
    ClosedForm,
    ScaledKappa,
    InstantaneousReference,
}

impl PredictionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PredictionMode::TransferMatrix => "transfer-matrix",
            PredictionMode::ClosedForm => "closed-form",
            PredictionMode::ScaledKappa => "scaled-kappa",
            PredictionMode::InstantaneousReference => "instantaneous-reference",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SffPoint {
    pub t: f64,
    pub tau: f64,
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SffPrediction {
    pub mode: PredictionMode,
    pub params: PottsParams,
    pub points: Vec<SffPoint>,
}

impl SffPrediction {
    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.k).collect()
    }

    /// CSV with a schema comment line; the header notes `f0 = L sigma2_phi`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# schema={PREDICTION_SCHEMA} f0=L*sigma2_phi")
            .map_err(|e| Error::io("<prediction>", e))?;
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["T", "tau", "K", "mode", "L", "chi", "Lambda", "sigma2_phi"])?;
        let p = &self.params;
        for pt in &self.points {
            c.write_record([
                pt.t.to_string(),
                pt.tau.to_string(),
                pt.k.to_string(),
                self.mode.as_str().to_string(),
                p.l.to_string(),
                p.chi().to_string(),
                p.lambda.to_string(),
                p.sigma2_phi.to_string(),
            ])?;
        }
        c.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn check_per_bond(table: &VarianceTable) -> Result<Vec<f64>> {
    if table.kind != TableKind::PerBond {
        return Err(Error::InvalidArgument(
            "transfer matrix needs a per-bond table".into(),
        ));
    }
    let t = table.period as usize;
    let mut row = vec![None; t];
    for e in &table.entries {
        if let [s] = e.key[..] {
            if (s as usize) < t {
                row[s as usize] = Some(e.sigma2);
            }
        }
    }
    row.into_iter()
        .enumerate()
        .map(|(s, v)| v.ok_or(Error::MissingEntry(s)))
        .collect()
}

/// Circulant eigenvalues `lambda_n = sum_s exp(-Lambda tau sigma2(s)/2) e^{2 pi i n s / T}`.
pub fn transfer_eigenvalues(
    table: &VarianceTable,
    lambda: f64,
    tau: f64,
) -> Result<Vec<Complex<f64>>> {
    let sigma2 = check_per_bond(table)?;
    let t = sigma2.len();
    let row: Vec<f64> = sigma2.iter().map(|&s| damping(lambda, tau, s)).collect();
    Ok((0..t)
        .map(|n| {
            let mut acc = Complex::new(0.0, 0.0);
            for (s, &r) in row.iter().enumerate() {
                let k = (n * s) % t;
                let (sin, cos) = (2.0 * std::f64::consts::PI * k as f64 / t as f64).sin_cos();
                acc += Complex::new(r * cos, r * sin);
            }
            acc
        })
        .collect())
}

/// `K(T) = sum_n lambda_n^L` at `T = table.period`.
pub fn sff_transfer_value(table: &VarianceTable, params: &PottsParams) -> Result<f64> {
    params.validate()?;
    let t = table.period as f64;
    let lam = transfer_eigenvalues(table, params.lambda, params.tau(t))?;
    Ok(lam
        .iter()
        .map(|z| z.powu(params.l))
        .sum::<Complex<f64>>()
        .re)
}

pub fn sff_transfer(table: &VarianceTable, params: &PottsParams) -> Result<SffPrediction> {
    let k = sff_transfer_value(table, params)?;
    let t = table.period as f64;
    Ok(SffPrediction {
        mode: PredictionMode::TransferMatrix,
        params: *params,
        points: vec![SffPoint {
            t,
            tau: params.tau(t),
            k,
        }],
    })
}

/// Transfer-matrix predictions for a table built per period.
pub fn sff_transfer_sweep<F>(
    params: &PottsParams,
    times: &[u32],
    table_for: F,
) -> Result<SffPrediction>
where
    F: Fn(u32) -> Result<VarianceTable>,
{
    let mut points = Vec::with_capacity(times.len());
    for &t in times {
        let table = table_for(t)?;
        if table.period != t {
            return Err(Error::InvalidArgument(format!(
                "table for T = {t} has period {}",
                table.period
            )));
        }
        let k = sff_transfer_value(&table, params)?;
        points.push(SffPoint {
            t: t as f64,
            tau: params.tau(t as f64),
            k,
        });
    }
    Ok(SffPrediction {
        mode: PredictionMode::TransferMatrix,
        params: *params,
        points,
    })
}

/// `x^L` from `ln x`, exact via `powi` whenever the result is representable.
fn pow_l(x: f64, ln_x: f64, l: u32) -> f64 {
    let e = l as f64 * ln_x;
    if e.abs() < 700.0 {
        x.powi(l as i32)
    } else {
        e.exp()
    }
}

/// `(1 - c + T c)^L + (T - 1)(1 - c)^L` with `c = chi^tau`, in the log domain.
pub fn closed_form_value(params: &PottsParams, t: f64) -> f64 {
    let tau = params.tau(t);
    let ln_c = tau * params.ln_chi();
    let c = ln_c.exp();
    let base = 1.0 + (t - 1.0) * c;
    let bump = pow_l(base, ((t - 1.0) * c).ln_1p(), params.l);
    let one_minus_c = -ln_c.exp_m1();
    let ramp = if one_minus_c == 0.0 {
        0.0
    } else {
        (t - 1.0) * pow_l(one_minus_c, one_minus_c.ln(), params.l)
    };
    bump + ramp
}

pub fn closed_form_sff(params: &PottsParams, times: &[f64]) -> Result<SffPrediction> {
    params.validate()?;
    Ok(SffPrediction {
        mode: PredictionMode::ClosedForm,
        params: *params,
        points: times
            .iter()
            .map(|&t| SffPoint {
                t,
                tau: params.tau(t),
                k: closed_form_value(params, t),
            })
            .collect(),
    })
}

/// Conjectured scaled SFF `kappa(tau) = (1 - y) + y tau`.
pub fn scaled_kappa(params: &PottsParams, tau: f64) -> f64 {
    let c = (tau * params.ln_chi()).exp();
    let l = params.l as i32;
    let y = (1.0 - c).powi(l - 1) * (1.0 - c + params.l as f64 * c);
    (1.0 - y) + y * tau
}

/// `ln L / |ln chi|`.
pub fn thouless_time(params: &PottsParams) -> Result<f64> {
    thouless_time_capped(params, THOULESS_CAP)
}

pub fn thouless_time_capped(params: &PottsParams, cap: f64) -> Result<f64> {
    params.validate()?;
    let chi = params.chi();
    if params.l < 2 {
        return Err(Error::Undefined("Thouless time needs L >= 2".into()));
    }
    if chi <= 0.0 || chi >= 1.0 {
        return Err(Error::Undefined(format!(
            "Thouless time needs 0 < chi < 1, got {chi}"
        )));
    }
    let t = (params.l as f64).ln() / params.ln_chi().abs();
    if !(t <= cap) {
        return Err(Error::Undefined(format!(
            "Thouless time {t:e} exceeds cap {cap:e}"
        )));
    }
    Ok(t)
}

/// `K_0(T) = T + (T^L - T) exp(-Lambda tau f0 / 2)` with `f0 = L sigma2_phi`.
pub fn k0_value(params: &PottsParams, t: f64) -> f64 {
    let f0 = params.l as f64 * params.sigma2_phi;
    let tl = pow_l(t, t.ln(), params.l);
    t + (tl - t) * damping(params.lambda, params.tau(t), f0)
}

pub fn k0_reference(params: &PottsParams, times: &[f64]) -> Result<SffPrediction> {
    params.validate()?;
    Ok(SffPrediction {
        mode: PredictionMode::InstantaneousReference,
        params: *params,
        points: times
            .iter()
            .map(|&t| SffPoint {
                t,
                tau: params.tau(t),
                k: k0_value(params, t),
            })
            .collect(),
    })
}

/// `(T^L - T) (Lambda tau A / 2) exp(-Lambda tau a / 2)` at each time.
pub fn deviation_bound(
    params: &PottsParams,
    a: f64,
    big_a: f64,
    times: &[f64],
) -> Result<Vec<f64>> {
    params.validate()?;
    if !(a > 0.0 && a < big_a && big_a.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < a < A, got a = {a}, A = {big_a}"
        )));
    }
    Ok(times
        .iter()
        .map(|&t| {
            let tau = params.tau(t);
            let tl = pow_l(t, t.ln(), params.l);
            (tl - t) * 0.5 * params.lambda * tau * big_a * (-0.5 * params.lambda * tau * a).exp()
        })
        .collect())
}

/// Distance of `(0, class)` to the diagonal of `Z_T^L` in the cyclic 1-norm.
pub fn perp_distance(class: &[u32], period: u32) -> u32 {
    let t = period;
    if t == 0 {
        return 0;
    }
    let cyc = |x: u32| x.min(t - x);
    // piecewise linear in the shift, minimal at one of the components
    std::iter::once(0)
        .chain(class.iter().copied())
        .map(|shift| {
            std::iter::once(0)
                .chain(class.iter().copied())
                .map(|s| cyc((s + t - shift) % t))
                .sum::<u32>()
        })
        .min()
        .unwrap_or(0)
}

/// Full-shift table with `sigma2([s]) = f0 (1 - eta^{|s|_perp^theta})`.
pub fn synthetic_decay_table(
    l: u32,
    period: u32,
    f0: f64,
    eta: f64,
    theta: f64,
) -> Result<VarianceTable> {
    if l < 1 || period == 0 {
        return Err(Error::InvalidArgument("need L >= 1 and T >= 1".into()));
    }
    if !(0.0 < eta && eta < 1.0 && theta > 0.0 && f0 > 0.0) {
        return Err(Error::InvalidArgument(
            "need 0 < eta < 1, theta > 0 and f0 > 0".into(),
        ));
    }
    let classes = (period as u64)
        .checked_pow(l - 1)
        .filter(|&c| c <= 1 << 24)
        .ok_or_else(|| Error::InvalidArgument("too many shift classes".into()))?;
    let mut entries = Vec::with_capacity(classes as usize);
    for idx in 0..classes {
        let mut key = vec![0u32; l as usize - 1];
        let mut rem = idx;
        for c in key.iter_mut().rev() {
            *c = (rem % period as u64) as u32;
            rem /= period as u64;
        }
        let d = perp_distance(&key, period);
        let sigma2 = if d == 0 {
            0.0
        } else {
            f0 * (1.0 - eta.powf((d as f64).powf(theta)))
        };
        entries.push(VarianceEntry {
            key,
            sigma2,
            std_error: 0.0,
        });
    }
    Ok(VarianceTable {
        period,
        kind: TableKind::FullShift,
        entries,
    })
}

/// `K(T) = T sum_[s] exp(-Lambda tau sigma2([s]) / 2)` for an all-to-all system.
pub fn sff_from_classes(table: &VarianceTable, params: &PottsParams) -> Result<f64> {
    params.validate()?;
    if table.kind != TableKind::FullShift {
        return Err(Error::InvalidArgument("need a full-shift table".into()));
    }
    let expected = (table.period as u64).pow(params.l - 1);
    if table.entries.len() as u64 != expected {
        return Err(Error::MissingEntry(table.entries.len()));
    }
    let t = table.period as f64;
    let tau = params.tau(t);
    Ok(t * table
        .entries
        .iter()
        .map(|e| damping(params.lambda, tau, e.sigma2))
        .sum::<f64>())
}

/// Constants `a < sigma2 < A` for the non-diagonal classes and `f0`.
pub fn fit_bound_constants(table: &VarianceTable, f0: f64) -> Option<(f64, f64)> {
    let off: Vec<f64> = table
        .entries
        .iter()
        .filter(|e| e.key.iter().any(|&k| k != 0))
        .map(|e| e.sigma2)
        .collect();
    if off.is_empty() {
        return None;
    }
    let lo = off.iter().copied().fold(f0, f64::min);
    let hi = off.iter().copied().fold(f0, f64::max);
    if lo <= 0.0 {
        return None;
    }
    Some((lo * (1.0 - 1e-9), hi * (1.0 + 1e-9)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub t: u32,
    pub k: f64,
    pub k0: f64,
    pub deviation: f64,
    pub bound: f64,
}

impl BoundRow {
    pub fn holds(&self) -> bool {
        self.deviation <= self.bound
    }
}

/// One synthetic decay family swept over `times`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundFamily {
    pub eta: f64,
    pub theta: f64,
    pub a: f64,
    pub big_a: f64,
    pub rows: Vec<BoundRow>,
}

impl BoundFamily {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(BoundRow::holds)
    }

    /// `|K - K_0| / K` at the last time.
    pub fn final_relative_deviation(&self) -> f64 {
        self.rows
            .last()
            .map(|r| r.deviation / r.k)
            .unwrap_or(f64::NAN)
    }
}

/// Compares `K` from a synthetic all-to-all table with `K_0` and the bound.
/// `a` and `A` are fitted over all tables in the sweep.
pub fn bound_validation(
    params: &PottsParams,
    eta: f64,
    theta: f64,
    times: &[u32],
) -> Result<BoundFamily> {
    params.validate()?;
    if params.l < 2 {
        return Err(Error::InvalidArgument(
            "bound validation needs L >= 2".into(),
        ));
    }
    let f0 = params.l as f64 * params.sigma2_phi;
    let tables: Vec<VarianceTable> = times
        .iter()
        .map(|&t| synthetic_decay_table(params.l, t, f0, eta, theta))
        .collect::<Result<_>>()?;
    let (mut a, mut big_a) = (f64::INFINITY, 0.0f64);
    for tb in &tables {
        if let Some((lo, hi)) = fit_bound_constants(tb, f0) {
            a = a.min(lo);
            big_a = big_a.max(hi);
        }
    }
    if !a.is_finite() {
        return Err(Error::InvalidArgument(
            "no asynchronous classes in sweep".into(),
        ));
    }
    let tf: Vec<f64> = times.iter().map(|&t| t as f64).collect();
    let bounds = deviation_bound(params, a, big_a, &tf)?;
    let mut rows = Vec::with_capacity(times.len());
    for ((tb, &t), bound) in tables.iter().zip(times).zip(bounds) {
        let k = sff_from_classes(tb, params)?;
        let k0 = k0_value(params, t as f64);
        rows.push(BoundRow {
            t,
            k,
            k0,
            deviation: (k - k0).abs(),
            bound,
        });
    }
    Ok(BoundFamily {
        eta,
        theta,
        a,
        big_a,
        rows,
    })
}

/// Shape landmarks of a sampled SFF curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmarks {
    /// Interior local maxima.
    pub maxima: usize,
    pub bump_t: Option<f64>,
    pub bump_k: Option<f64>,
    /// Deepest point after the bump.
    pub dip_t: Option<f64>,
    /// First time after the bump with `|K/T - 1| < 0.1`.
    pub ramp_onset: Option<f64>,
}

pub fn landmarks(points: &[SffPoint]) -> Landmarks {
    let mut maxima = 0;
    let mut bump: Option<usize> = None;
    for i in 1..points.len().saturating_sub(1) {
        if points[i].k > points[i - 1].k && points[i].k >= points[i + 1].k {
            maxima += 1;
            if bump.is_none_or(|b| points[i].k > points[b].k) {
                bump = Some(i);
            }
        }
    }
    let after = bump.unwrap_or(0);
    let dip = points[after..]
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1.k / a.1.t).total_cmp(&(b.1.k / b.1.t)))
        .map(|(i, _)| after + i);
    let onset = points[after..]
        .iter()
        .find(|p| (p.k / p.t - 1.0).abs() < 0.1)
        .map(|p| p.t);
    Landmarks {
        maxima,
        bump_t: bump.map(|i| points[i].t),
        bump_k: bump.map(|i| points[i].k),
        dip_t: if bump.is_some() {
            dip.map(|i| points[i].t)
        } else {
            None
        },
        ramp_onset: onset,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn two_point_dft() {
        let t = VarianceTable::potts(2, 0.8);
        let (lambda, tau) = (1.3, 0.7);
        let c = (-0.5 * lambda * tau * 0.8f64).exp();
        let l = transfer_eigenvalues(&t, lambda, tau).unwrap();
        assert!((l[0].re - (1.0 + c)).abs() < 1e-15 && l[0].im.abs() < 1e-15);
        assert!((l[1].re - (1.0 - c)).abs() < 1e-15 && l[1].im.abs() < 1e-15);
    }

    #[test]
    fn potts_eigenvalues() {
        let t = 7;
        let table = VarianceTable::potts(t, 1.0);
        let p = PottsParams::from_chi(3, 1.0, 0.6).unwrap();
        let tau = 2.0;
        let c = 0.6f64.powf(tau);
        let l = transfer_eigenvalues(&table, p.lambda, tau).unwrap();
        assert!((l[0].re - (1.0 - c + t as f64 * c)).abs() < 1e-13);
        for z in &l[1..] {
            assert!((z.re - (1.0 - c)).abs() < 1e-13 && z.im.abs() < 1e-13);
        }
    }

    #[test]
    fn missing_entry_rejected() {
        let mut t = VarianceTable::potts(4, 1.0);
        t.entries.remove(2);
        assert!(matches!(
            transfer_eigenvalues(&t, 1.0, 1.0),
            Err(Error::MissingEntry(2))
        ));
    }

    #[test]
    fn eigenvalue_sum_is_trace() {
        let table = VarianceTable::per_bond_from_fn(9, |s| (s as f64 * 0.37).sin().abs());
        let l = transfer_eigenvalues(&table, 2.0, 0.5).unwrap();
        let s: Complex<f64> = l.iter().sum();
        assert!((s.re - 9.0).abs() < 1e-12 && s.im.abs() < 1e-12);
    }

    #[test]
    fn transfer_matches_matrix_power_trace() {
        let table = VarianceTable::per_bond_from_fn(6, |s| 0.3 * s as f64 + 0.1 * (s * s) as f64);
        let p = PottsParams {
            l: 4,
            t_h: 3.0,
            lambda: 0.9,
            sigma2_phi: 1.0,
        };
        let tau = p.tau(6.0);
        let sig: Vec<f64> = (0..6).map(|s| table.get(&[s]).unwrap().sigma2).collect();
        let omega = DMatrix::from_fn(6, 6, |i, j| {
            let s = (j + 6 - i) % 6;
            damping(p.lambda, tau, sig[s])
        });
        let mut pow = DMatrix::identity(6, 6);
        for _ in 0..p.l {
            pow = &pow * &omega;
        }
        let k = sff_transfer_value(&table, &p).unwrap();
        assert!(rel(k, pow.trace()) < 1e-10);
    }

    #[test]
    fn single_site_and_zero_coupling() {
        let table = VarianceTable::per_bond_from_fn(5, |s| s as f64);
        let p1 = PottsParams {
            l: 1,
            t_h: 1.0,
            lambda: 0.4,
            sigma2_phi: 1.0,
        };
        assert!((sff_transfer_value(&table, &p1).unwrap() - 5.0).abs() < 1e-12);
        let p0 = PottsParams {
            l: 3,
            lambda: 0.0,
            ..p1
        };
        assert!((sff_transfer_value(&table, &p0).unwrap() - 125.0).abs() < 1e-10);
    }

    #[test]
    fn closed_form_limits() {
        let one = PottsParams::from_chi(3, 1.0, 1.0).unwrap();
        let zero = PottsParams::from_chi(3, 1.0, 0.0).unwrap();
        for t in 1..50 {
            let tf = t as f64;
            assert_eq!(closed_form_value(&one, tf), tf.powi(3));
            assert_eq!(closed_form_value(&zero, tf), tf);
        }
    }

    #[test]
    fn closed_form_survives_huge_intermediates() {
        let p = PottsParams::from_chi(40, 1.0, 0.999_999).unwrap();
        let k = closed_form_value(&p, 1e7);
        assert!(k.is_finite() && k > 1e7);
    }

    #[test]
    fn kappa_endpoints() {
        for l in 2..6 {
            let one = PottsParams::from_chi(l, 1.0, 1.0).unwrap();
            let zero = PottsParams::from_chi(l, 1.0, 0.0).unwrap();
            for &tau in &[0.1, 0.5, 2.0] {
                assert_eq!(scaled_kappa(&one, tau), 1.0);
                assert_eq!(scaled_kappa(&zero, tau), tau);
            }
        }
        let single = PottsParams::from_chi(1, 1.0, 0.3).unwrap();
        assert!((scaled_kappa(&single, 0.7) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn thouless_examples() {
        let p = PottsParams::from_chi(2, 1.0, 0.5).unwrap();
        assert!((thouless_time(&p).unwrap() - 1.0).abs() < 1e-15);
        let near_one = PottsParams::from_chi(2, 1.0, 1.0 - 1e-15).unwrap();
        assert!(matches!(thouless_time(&near_one), Err(Error::Undefined(_))));
        let one = PottsParams::from_chi(2, 1.0, 1.0).unwrap();
        assert!(thouless_time(&one).is_err());
        let zero = PottsParams::from_chi(2, 1.0, 0.0).unwrap();
        assert!(thouless_time(&zero).is_err());
    }

    #[test]
    fn k0_examples() {
        let p = PottsParams {
            l: 3,
            t_h: 2.0,
            lambda: 0.0,
            sigma2_phi: 1.0,
        };
        assert_eq!(k0_value(&p, 4.0), 64.0);
        let q = PottsParams { lambda: 3.0, ..p };
        assert_eq!(k0_value(&q, 1.0), 1.0);
        // two sites: f0 = 2 sigma2_phi makes K_0 the closed form
        let two = PottsParams::from_chi(2, 5.0, 0.8).unwrap();
        for t in 1..40 {
            let tf = t as f64;
            assert!(rel(k0_value(&two, tf), closed_form_value(&two, tf)) < 1e-13);
        }
    }

    #[test]
    fn bound_rejects_bad_constants() {
        let p = PottsParams::from_chi(3, 1.0, 0.5).unwrap();
        assert!(deviation_bound(&p, 1.0, 1.0, &[2.0]).is_err());
        assert!(deviation_bound(&p, 2.0, 1.0, &[2.0]).is_err());
    }

    #[test]
    fn potts_classes_give_k0() {
        // a table that equals the instantaneous model gives K = K_0 exactly
        let p = PottsParams::from_chi(3, 4.0, 0.7).unwrap();
        let f0 = 3.0;
        for t in 2..10 {
            let mut tb = synthetic_decay_table(3, t, f0, 0.5, 1.0).unwrap();
            for e in tb.entries.iter_mut() {
                if e.sigma2 > 0.0 {
                    e.sigma2 = f0;
                }
            }
            let k = sff_from_classes(&tb, &p).unwrap();
            assert!(rel(k, k0_value(&p, t as f64)) < 1e-12);
        }
    }

    #[test]
    fn perp_distance_examples() {
        assert_eq!(perp_distance(&[0, 0], 5), 0);
        assert_eq!(perp_distance(&[1, 1], 5), 1);
        assert_eq!(perp_distance(&[4], 5), 1);
        assert_eq!(perp_distance(&[1, 2], 8), 2);
    }

    #[test]
    fn landmarks_of_bump_ramp() {
        let p = PottsParams::from_chi(3, 1.0, 0.975).unwrap();
        let times: Vec<f64> = (1..=1500).map(|t| t as f64).collect();
        let pred = closed_form_sff(&p, &times).unwrap();
        let lm = landmarks(&pred.points);
        assert_eq!(lm.maxima, 1);
        let b = lm.bump_t.unwrap();
        // (T - 1) chi^T peaks at T - 1 = 1 / |ln chi|
        assert!((b - 1.0 - 1.0 / 0.975f64.ln().abs()).abs() < 5.0, "{lm:?}");
        assert!(lm.ramp_onset.unwrap() > b);
    }
}
