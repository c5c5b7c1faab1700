//! Long-time variances of the phase functional.
//!
//! Two estimators are provided: the time average of squared Birkhoff sums
//! over uniform initial conditions, and the double-sided correlation series.

use serde::{Deserialize, Serialize};

use crate::classical::{BondObservable, SiteObservable, SystemSpec, Topology};
use crate::ergodic::{advance, estimate_correlation, sample_moments, sub_seed};
use crate::error::{Error, Result};
use crate::orbits::ShiftVector;
use crate::torus::{CatMapSpec, LatticePoint, TorusPoint};

/// Number of horizon doublings in the time-average ladder.
pub const LADDER: usize = 4;

/// `(1/H) <S_H^2>` at one horizon `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderRung {
    pub horizon: u64,
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAverageEstimate {
    /// Extrapolated variance `2 A(2H) - A(H)` from the two longest horizons.
    pub sigma2: f64,
    pub std_error: f64,
    /// Rungs at `H, 2H, 4H, 8H`.
    pub ladder: Vec<LadderRung>,
    /// Three consecutive doublings agree within one combined standard error.
    pub plateau: bool,
}

/// Time-average estimator for the observable `obs` and integer site shifts `s`.
pub fn variance_time_average_obs<O: SiteObservable + ?Sized>(
    obs: &O,
    map: &CatMapSpec,
    s: &[i64],
    horizon: u64,
    samples: u64,
    seed: u64,
) -> Result<TimeAverageEstimate> {
    let l = obs.sites();
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be >= 1".into()));
    }
    if s.len() != l {
        return Err(Error::InvalidArgument(format!(
            "shift has {} components, system has {l} sites",
            s.len()
        )));
    }
    let top = horizon << (LADDER - 1);
    let moments = sample_moments(l, samples, seed, LADDER + 1, |x0, out| {
        let mut x: Vec<LatticePoint> = x0.to_vec();
        let mut y: Vec<LatticePoint> = x0
            .iter()
            .zip(s)
            .map(|(&p, &sk)| advance(p, map, sk))
            .collect();
        let mut bx = vec![TorusPoint { q: 0.0, p: 0.0 }; l];
        let mut by = bx.clone();
        let mut sum = 0.0;
        let mut rung = 0;
        let mut next = horizon;
        for t in 1..=top {
            for k in 0..l {
                bx[k] = x[k].to_torus();
                by[k] = y[k].to_torus();
                x[k] = x[k].step(map);
                y[k] = y[k].step(map);
            }
            sum += obs.eval(&bx) - obs.eval(&by);
            if t == next {
                out[rung] = sum * sum / t as f64;
                rung += 1;
                next <<= 1;
            }
        }
        out[LADDER] = 2.0 * out[LADDER - 1] - out[LADDER - 2];
    })?;
    let ladder: Vec<LadderRung> = (0..LADDER)
        .map(|k| LadderRung {
            horizon: horizon << k,
            value: moments[k].mean,
            std_error: moments[k].std_error(),
        })
        .collect();
    let plateau = ladder.windows(2).all(|w| {
        (w[1].value - w[0].value).abs() <= (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt()
    });
    Ok(TimeAverageEstimate {
        sigma2: moments[LADDER].mean,
        std_error: moments[LADDER].std_error(),
        ladder,
        plateau,
    })
}

/// Time-average variance of the full phase functional for shift `s`.
pub fn variance_time_average(
    spec: &SystemSpec,
    s: &ShiftVector,
    horizon: u64,
    samples: u64,
    seed: u64,
) -> Result<TimeAverageEstimate> {
    spec.validate()?;
    variance_time_average_obs(spec, &spec.map, &s.as_i64(), horizon, samples, seed)
}

/// Supplies `C(u) = <D(phi_0^u x) D(x)>` at integer site shifts `u`.
pub trait CorrelationSource: Sync {
    fn sites(&self) -> usize;
    /// Value and standard error.
    fn correlation(&self, u: &[i64], index: u64) -> Result<(f64, f64)>;
}

/// Monte Carlo correlations of an observable; term `index` uses its own sub-seed.
pub struct MonteCarloCorrelations<'a, O: SiteObservable + ?Sized> {
    pub obs: &'a O,
    pub map: CatMapSpec,
    pub samples: u64,
    pub seed: u64,
}

impl<O: SiteObservable + ?Sized> CorrelationSource for MonteCarloCorrelations<'_, O> {
    fn sites(&self) -> usize {
        self.obs.sites()
    }

    fn correlation(&self, u: &[i64], index: u64) -> Result<(f64, f64)> {
        let c = estimate_correlation(
            self.obs,
            &self.map,
            u,
            self.samples,
            sub_seed(self.seed, index),
        )?;
        Ok((c.value, c.std_error))
    }
}

/// `C(t (1,..,1)) = c0 eta^|t|` and zero at every non-synchronous shift.
#[derive(Debug, Clone, Copy)]
pub struct GeometricCorrelations {
    pub sites: usize,
    pub c0: f64,
    pub eta: f64,
}

impl CorrelationSource for GeometricCorrelations {
    fn sites(&self) -> usize {
        self.sites
    }

    fn correlation(&self, u: &[i64], _index: u64) -> Result<(f64, f64)> {
        if u.windows(2).all(|w| w[0] == w[1]) {
            let t = u.first().copied().unwrap_or(0).unsigned_abs();
            Ok((self.c0 * self.eta.powi(t as i32), 0.0))
        } else {
            Ok((0.0, 0.0))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesEstimate {
    pub sigma2: f64,
    pub std_error: f64,
    /// Geometric bound on the terms beyond `t_max`.
    pub truncation_bound: f64,
    /// Fitted decay ratio per unit of `|t|`.
    pub decay_ratio: f64,
    pub t_max: u32,
}

/// `sigma^2 = 2 sum_{|t| <= t_max} [C(t 1) - C(t 1 + s)]`.
pub fn variance_series<C: CorrelationSource + ?Sized>(
    source: &C,
    s: &[i64],
    t_max: u32,
) -> Result<SeriesEstimate> {
    let l = source.sites();
    if s.len() != l {
        return Err(Error::InvalidArgument(format!(
            "shift has {} components, system has {l} sites",
            s.len()
        )));
    }
    let tm = t_max as i64;
    let mut sigma2 = 0.0;
    let mut var = 0.0;
    // magnitude and error per term at each |t|, averaged over the two signs
    let mut mag = vec![0.0; t_max as usize + 1];
    let mut err = vec![0.0; t_max as usize + 1];
    let mut index = 0u64;
    for t in -tm..=tm {
        let diag = vec![t; l];
        let shifted: Vec<i64> = s.iter().map(|&sk| sk + t).collect();
        let (c1, e1) = source.correlation(&diag, index)?;
        let (c2, e2) = source.correlation(&shifted, index + 1)?;
        index += 2;
        sigma2 += 2.0 * (c1 - c2);
        var += 4.0 * (e1 * e1 + e2 * e2);
        let k = t.unsigned_abs() as usize;
        mag[k] += c1.abs() + c2.abs();
        err[k] += e1 * e1 + e2 * e2;
    }
    // fit on the leading run of significant terms
    for k in 1..mag.len() {
        mag[k] /= 2.0;
        err[k] /= 4.0;
    }
    let mut pts = Vec::new();
    for k in 0..mag.len() {
        let e = err[k].sqrt();
        if mag[k] > 0.0 && mag[k] > 3.0 * e {
            pts.push((k as f64, mag[k].ln()));
        } else {
            break;
        }
    }
    let (ratio, amp) = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        (slope.exp(), (my - slope * mx).exp())
    } else {
        (0.0, 0.0)
    };
    if ratio >= 1.0 - 1e-9 {
        return Err(Error::NonDecaying { ratio });
    }
    let truncation_bound = if ratio > 0.0 {
        // two signs of t, each term weighted by 2
        4.0 * amp * ratio.powi(t_max as i32 + 1) / (1.0 - ratio)
    } else {
        0.0
    };
    Ok(SeriesEstimate {
        sigma2,
        std_error: var.sqrt(),
        truncation_bound,
        decay_ratio: ratio,
        t_max,
    })
}

/// Class of `s` in `Z_T^L / diag(Z_T)`: `(s_2 - s_1, ..., s_L - s_1) mod T`.
pub fn quotient_projection(s: &ShiftVector) -> Vec<u32> {
    let t = s.period;
    match s.r.first() {
        None => Vec::new(),
        Some(&s0) => s.r[1..].iter().map(|&x| (x + t - s0) % t).collect(),
    }
}

/// Inverse of [`quotient_projection`] fixing the first component to zero.
pub fn class_representative(class: &[u32], period: u32) -> ShiftVector {
    let mut r = Vec::with_capacity(class.len() + 1);
    r.push(0);
    r.extend(class.iter().map(|c| c % period));
    ShiftVector { r, period }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    PerBond,
    FullShift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceEntry {
    /// `[s~]` for per-bond tables, the class in `Z_T^{L-1}` otherwise.
    pub key: Vec<u32>,
    pub sigma2: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceTable {
    pub period: u32,
    pub kind: TableKind,
    pub entries: Vec<VarianceEntry>,
}

impl VarianceTable {
    /// Per-bond table with `sigma^2(0) = 0` and `sigma2_phi` elsewhere.
    pub fn potts(period: u32, sigma2_phi: f64) -> Self {
        Self::per_bond_from_fn(period, |s| if s == 0 { 0.0 } else { sigma2_phi })
    }

    pub fn per_bond_from_fn<F: Fn(u32) -> f64>(period: u32, f: F) -> Self {
        VarianceTable {
            period,
            kind: TableKind::PerBond,
            entries: (0..period)
                .map(|s| VarianceEntry {
                    key: vec![s],
                    sigma2: f(s),
                    std_error: 0.0,
                })
                .collect(),
        }
    }

    pub fn get(&self, key: &[u32]) -> Option<&VarianceEntry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["key", "sigma2", "std_error"])?;
        for e in &self.entries {
            let key = e
                .key
                .iter()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join(":");
            w.write_record([key, e.sigma2.to_string(), e.std_error.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Estimator used to fill a table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum VarianceEstimator {
    TimeAverage { horizon: u64, samples: u64 },
    Series { t_max: u32, samples: u64 },
}

fn estimate<O: SiteObservable + ?Sized>(
    obs: &O,
    map: &CatMapSpec,
    s: &[i64],
    est: VarianceEstimator,
    seed: u64,
) -> Result<(f64, f64)> {
    match est {
        VarianceEstimator::TimeAverage { horizon, samples } => {
            let r = variance_time_average_obs(obs, map, s, horizon, samples, seed)?;
            Ok((r.sigma2, r.std_error))
        }
        VarianceEstimator::Series { t_max, samples } => {
            let src = MonteCarloCorrelations {
                obs,
                map: *map,
                samples,
                seed,
            };
            let r = variance_series(&src, s, t_max)?;
            Ok((
                r.sigma2,
                (r.std_error.powi(2) + r.truncation_bound.powi(2)).sqrt(),
            ))
        }
    }
}

/// Variances `sigma^2_{v_s~}` of a single bond for `s~ = 0..T-1`.
pub fn per_bond_variance_table(
    spec: &SystemSpec,
    period: u32,
    est: VarianceEstimator,
    seed: u64,
) -> Result<VarianceTable> {
    spec.validate()?;
    if spec.topology != Topology::NearestNeighbourPeriodic {
        return Err(Error::Topology(
            "per-bond tables need a nearest-neighbour chain".into(),
        ));
    }
    if period == 0 {
        return Err(Error::InvalidArgument("period must be positive".into()));
    }
    let bond = BondObservable(spec.interaction);
    let mut entries = Vec::with_capacity(period as usize);
    for s in 0..period {
        let (sigma2, std_error) = if s == 0 {
            (0.0, 0.0)
        } else {
            estimate(
                &bond,
                &spec.map,
                &[s as i64, 0],
                est,
                sub_seed(seed, s as u64),
            )?
        };
        entries.push(VarianceEntry {
            key: vec![s],
            sigma2,
            std_error,
        });
    }
    Ok(VarianceTable {
        period,
        kind: TableKind::PerBond,
        entries,
    })
}

/// Variances of the full observable for every class of `Z_T^{L-1}`.
pub fn full_variance_table(
    spec: &SystemSpec,
    period: u32,
    est: VarianceEstimator,
    seed: u64,
) -> Result<VarianceTable> {
    spec.validate()?;
    if period == 0 {
        return Err(Error::InvalidArgument("period must be positive".into()));
    }
    let classes = (period as u64)
        .checked_pow(spec.l as u32 - 1)
        .filter(|&c| c <= 1 << 16)
        .ok_or_else(|| Error::InvalidArgument("too many shift classes".into()))?;
    let mut entries = Vec::with_capacity(classes as usize);
    for idx in 0..classes {
        let mut class = vec![0u32; spec.l - 1];
        let mut rem = idx;
        for c in class.iter_mut().rev() {
            *c = (rem % period as u64) as u32;
            rem /= period as u64;
        }
        let s = class_representative(&class, period);
        let (sigma2, std_error) = if s.is_diagonal() {
            (0.0, 0.0)
        } else {
            estimate(spec, &spec.map, &s.as_i64(), est, sub_seed(seed, idx))?
        };
        entries.push(VarianceEntry {
            key: class,
            sigma2,
            std_error,
        });
    }
    Ok(VarianceTable {
        period,
        kind: TableKind::FullShift,
        entries,
    })
}
