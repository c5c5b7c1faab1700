//! Continuation of periodic orbits in the coupling and the exact action
//! difference of a continued pair.
//!
//! A period-`T` orbit is described by its positions `Q_0..Q_{T-1}`. Writing
//! `Q_t = q_t + delta_t` around the unperturbed orbit `q_t`, the periodicity
//! condition of the kicked map becomes
//!
//! `delta_{t+1} + delta_{t-1} - tr(M) delta_t - b eps grad V(q_t + delta_t) = 0`
//!
//! with cyclic indices, since the linear part is satisfied exactly by `q_t`.
//! In the same variables the action change of the orbit is
//! `sum_t W_cat(delta_{t+1}, delta_t) + eps sum_t V(q_t + delta_t)`; the terms
//! linear in `delta` telescope against the winding correction and drop out.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::classical::SystemSpec;
use crate::error::{Error, Result};
use crate::orbits::{shift_action_exact, OrbitFamily, ShiftVector};
use crate::torus::CatMapSpec;

use super::phase::phase_difference;

const MAX_NEWTON: usize = 50;
const NEWTON_TOL: f64 = 1e-15;

/// Result of continuing one orbit to coupling `eps`.
#[derive(Debug, Clone)]
struct Continued {
    delta: Vec<f64>,
    iterations: usize,
}

fn residual(spec: &SystemSpec, q: &[Vec<f64>], delta: &[f64], eps: f64) -> Vec<f64> {
    let l = spec.l;
    let t = q.len();
    let tr = spec.map.trace() as f64;
    let b = spec.map.b as f64;
    let mut out = vec![0.0; l * t];
    let mut pos = vec![0.0; l];
    for s in 0..t {
        let next = (s + 1) % t;
        let prev = (s + t - 1) % t;
        for k in 0..l {
            pos[k] = q[s][k] + delta[s * l + k];
        }
        let g = spec.potential_gradient(&pos, None);
        for k in 0..l {
            out[s * l + k] =
                delta[next * l + k] + delta[prev * l + k] - tr * delta[s * l + k] - b * eps * g[k];
        }
    }
    out
}

fn jacobian(spec: &SystemSpec, q: &[Vec<f64>], delta: &[f64], eps: f64) -> DMatrix<f64> {
    let l = spec.l;
    let t = q.len();
    let n = l * t;
    let tr = spec.map.trace() as f64;
    let b = spec.map.b as f64;
    let mut j = DMatrix::zeros(n, n);
    let mut pos = vec![0.0; l];
    for s in 0..t {
        let next = (s + 1) % t;
        let prev = (s + t - 1) % t;
        for k in 0..l {
            pos[k] = q[s][k] + delta[s * l + k];
        }
        let h = spec.potential_hessian(&pos);
        for k in 0..l {
            let row = s * l + k;
            j[(row, next * l + k)] += 1.0;
            j[(row, prev * l + k)] += 1.0;
            j[(row, row)] -= tr;
            for m in 0..l {
                j[(row, s * l + m)] -= b * eps * h[k * l + m];
            }
        }
    }
    j
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn continue_orbit(spec: &SystemSpec, q: &[Vec<f64>], eps: f64) -> Option<Continued> {
    let n = spec.l * q.len();
    let mut delta = vec![0.0; n];
    if eps == 0.0 {
        return Some(Continued {
            delta,
            iterations: 0,
        });
    }
    let mut f = residual(spec, q, &delta, eps);
    let mut fnorm = norm(&f);
    for it in 1..=MAX_NEWTON {
        let j = jacobian(spec, q, &delta, eps);
        let step = j.lu().solve(&DVector::from_vec(f.clone()))?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = delta
                .iter()
                .zip(step.iter())
                .map(|(d, s)| d - lambda * s)
                .collect();
            let ft = residual(spec, q, &trial, eps);
            let nt = norm(&ft);
            if nt < fnorm || lambda < 1e-6 {
                delta = trial;
                f = ft;
                fnorm = nt;
                break;
            }
            lambda *= 0.5;
        }
        let scale = 1.0 + norm(&delta);
        if step.norm() * lambda <= NEWTON_TOL * scale || fnorm <= NEWTON_TOL * eps {
            return Some(Continued {
                delta,
                iterations: it,
            });
        }
    }
    None
}

fn w_cat(m: &CatMapSpec, x1: f64, x0: f64) -> f64 {
    (m.d as f64 * x1 * x1 - 2.0 * x0 * x1 + m.a as f64 * x0 * x0) / (2.0 * m.b as f64)
}

/// `S(eps) - S(0) - eps * sum_t V(q_t)` for one continued orbit, i.e. the part
/// of the action change beyond first order.
fn second_order_action(spec: &SystemSpec, q: &[Vec<f64>], c: &Continued, eps: f64) -> f64 {
    let l = spec.l;
    let t = q.len();
    let mut quad = 0.0;
    let mut dv = 0.0;
    let mut pos = vec![0.0; l];
    for s in 0..t {
        let next = (s + 1) % t;
        for k in 0..l {
            quad += w_cat(&spec.map, c.delta[next * l + k], c.delta[s * l + k]);
            pos[k] = q[s][k] + c.delta[s * l + k];
        }
        dv += spec.potential(&pos, None) - spec.potential(&q[s], None);
    }
    quad + eps * dv
}

fn positions(family: &OrbitFamily, r: &ShiftVector, m: &CatMapSpec) -> Vec<Vec<f64>> {
    let mut x = shift_action_exact(family, r, m);
    (0..family.period())
        .map(|_| {
            let q = x.iter().map(|p| p.to_torus().q).collect();
            for p in x.iter_mut() {
                *p = p.step(m);
            }
            q
        })
        .collect()
}

/// Outcome of [`action_difference_identity_check`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionIdentityReport {
    pub period: u32,
    pub r: Vec<u32>,
    pub s: Vec<u32>,
    /// First-order phase `Phi` of the pair.
    pub phi: f64,
    pub epsilons: Vec<f64>,
    /// Exact action difference `Delta(eps)`.
    pub deltas: Vec<f64>,
    /// `|Delta(eps) - eps Phi|`.
    pub residuals: Vec<f64>,
    pub newton_iterations: Vec<usize>,
    /// False when Newton failed for some `eps`; such pairs are excluded upstream.
    pub converged: bool,
    /// Least-squares slope of `ln residual` against `ln eps`, when defined.
    pub exponent: Option<f64>,
}

/// Continues the orbits through `phi_0^r Gamma_0` and `phi_0^s Gamma_0` to
/// each coupling in `epsilons` and compares their action difference with
/// `eps * Phi`.
pub fn action_difference_identity_check(
    family: &OrbitFamily,
    r: &ShiftVector,
    s: &ShiftVector,
    spec: &SystemSpec,
    epsilons: &[f64],
) -> Result<ActionIdentityReport> {
    spec.validate()?;
    if spec.map.b == 0 {
        return Err(Error::InvalidArgument(
            "position continuation needs a map with b != 0".into(),
        ));
    }
    if epsilons.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidArgument("epsilons must be finite".into()));
    }
    let phi = phase_difference(family, r, s, spec);
    let qa = positions(family, r, &spec.map);
    let qb = positions(family, s, &spec.map);

    let mut deltas = Vec::new();
    let mut residuals = Vec::new();
    let mut iterations = Vec::new();
    let mut converged = true;
    for &eps in epsilons {
        match (
            continue_orbit(spec, &qa, eps),
            continue_orbit(spec, &qb, eps),
        ) {
            (Some(ca), Some(cb)) => {
                let extra = second_order_action(spec, &qa, &ca, eps)
                    - second_order_action(spec, &qb, &cb, eps);
                deltas.push(eps * phi + extra);
                residuals.push(extra.abs());
                iterations.push(ca.iterations.max(cb.iterations));
            }
            _ => {
                converged = false;
                deltas.push(f64::NAN);
                residuals.push(f64::NAN);
                iterations.push(MAX_NEWTON);
            }
        }
    }
    let exponent = if converged {
        fit_exponent(epsilons, &residuals)
    } else {
        None
    };
    Ok(ActionIdentityReport {
        period: family.period(),
        r: r.r.clone(),
        s: s.r.clone(),
        phi,
        epsilons: epsilons.to_vec(),
        deltas,
        residuals,
        newton_iterations: iterations,
        converged,
        exponent,
    })
}

/// Slope of `ln y` against `ln x` over points with `x, y > 0`.
pub fn fit_exponent(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::coupled_step;
    use crate::orbits::family_iterator;
    use crate::torus::{wrap_unit, ManyBodyPoint, TorusPoint};

    const EPS: [f64; 3] = [1e-3, 1e-4, 1e-5];

    fn first_family(spec: &SystemSpec, t: u32) -> OrbitFamily {
        family_iterator(spec, t)
            .unwrap()
            .find(|f| f.reps.iter().all(|o| o.primitive_period == t))
            .unwrap()
    }

    #[test]
    fn zero_coupling_gives_zero() {
        let spec = SystemSpec::ring(2, 0.0);
        let fam = first_family(&spec, 3);
        let rep = action_difference_identity_check(
            &fam,
            &ShiftVector::zero(2, 3),
            &ShiftVector::new(&[0, 1], 3),
            &spec,
            &[0.0],
        )
        .unwrap();
        assert_eq!(rep.deltas, vec![0.0]);
    }

    #[test]
    fn synchronous_pair_has_no_difference() {
        let spec = SystemSpec::ring(2, 0.0);
        let fam = first_family(&spec, 4);
        let rep = action_difference_identity_check(
            &fam,
            &ShiftVector::new(&[0, 1], 4),
            &ShiftVector::new(&[2, 3], 4),
            &spec,
            &EPS,
        )
        .unwrap();
        assert!(rep.converged);
        assert!(rep.phi.abs() < 1e-12);
        for d in &rep.deltas {
            assert!(d.abs() < 1e-14, "{d}");
        }
    }

    #[test]
    fn residual_is_quadratic() {
        let spec = SystemSpec::ring(2, 0.0);
        let fam = first_family(&spec, 5);
        let rep = action_difference_identity_check(
            &fam,
            &ShiftVector::zero(2, 5),
            &ShiftVector::new(&[0, 2], 5),
            &spec,
            &EPS,
        )
        .unwrap();
        assert!(rep.converged);
        let k = rep.exponent.unwrap();
        assert!((k - 2.0).abs() < 0.1, "exponent {k}, {rep:?}");
        let ratio = rep.residuals[0] / rep.residuals[1];
        assert!((ratio / 100.0 - 1.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn continued_orbit_is_periodic_under_coupled_map() {
        // the Newton solution, rebuilt as phase-space points, must return to
        // itself after T steps of the kicked map
        let t = 4;
        let eps = 1e-3;
        let spec = SystemSpec::ring(2, eps);
        let fam = first_family(&spec, t);
        let q = positions(&fam, &ShiftVector::zero(2, t), &spec.map);
        let c = continue_orbit(&spec, &q, eps).unwrap();
        let l = spec.l;
        let pos = |s: usize| -> Vec<f64> {
            (0..l)
                .map(|k| q[s % t as usize][k] + c.delta[(s % t as usize) * l + k])
                .collect()
        };
        let b = spec.map.b as f64;
        let a = spec.map.a as f64;
        let q0 = pos(0);
        let q1 = pos(1);
        let g = spec.potential_gradient(&q0, None);
        let sites = (0..l)
            .map(|k| {
                let p_kicked = (q1[k] - a * q0[k]) / b;
                TorusPoint::new(q0[k], p_kicked - eps * g[k])
            })
            .collect();
        let start = ManyBodyPoint::new(sites);
        let mut x = start.clone();
        for _ in 0..t {
            x = coupled_step(&x, &spec);
        }
        for (u, v) in x.sites.iter().zip(&start.sites) {
            let d = |a: f64, b: f64| {
                let e = wrap_unit(a - b);
                e.min(1.0 - e)
            };
            assert!(d(u.q, v.q) < 1e-12 && d(u.p, v.p) < 1e-12);
        }
    }

    #[test]
    fn exponent_fit() {
        let x = [1e-3, 1e-4, 1e-5];
        let y: Vec<f64> = x.iter().map(|e| 3.0 * e * e).collect();
        assert!((fit_exponent(&x, &y).unwrap() - 2.0).abs() < 1e-12);
        assert!(fit_exponent(&[1.0], &[1.0]).is_none());
    }
}
