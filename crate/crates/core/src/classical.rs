//! Coupled cat maps on the product torus.
//!
//! The generating function of one step is
//! `W(q', q; eps) = sum_l W_cat(q'_l, q_l) + eps * V(q)` with the pair potential
//! `V(q) = sum_bonds w(q_i, q_j)`, so the first-order interaction
//! `d_eps W |_0 = V(q)` is evaluated at the position before the step. The
//! classical map is a momentum kick by `eps * grad V` followed by independent
//! cat-map steps on every site.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{subsystem_step, wrap_unit, CatMapSpec, ManyBodyPoint, TorusPoint};

const TWO_PI: f64 = 2.0 * PI;

/// Spatial structure of the coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    /// Bonds `(l, l+1)` with site `L+1` identified with site 1.
    NearestNeighbourPeriodic,
    /// Every ordered pair `(l, m)`, `l != m`.
    AllToAll,
}

/// Pair observable `w(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Interaction {
    /// `amplitude * cos(2 pi (q_x - q_y))`, mean zero on the torus.
    Cosine { amplitude: f64 },
}

impl Default for Interaction {
    fn default() -> Self {
        Interaction::Cosine { amplitude: 1.0 }
    }
}

impl Interaction {
    #[inline]
    pub fn value(&self, qx: f64, qy: f64) -> f64 {
        match *self {
            Interaction::Cosine { amplitude } => amplitude * (TWO_PI * (qx - qy)).cos(),
        }
    }

    /// `(dw/dq_x, dw/dq_y)`
    #[inline]
    pub fn gradient(&self, qx: f64, qy: f64) -> (f64, f64) {
        match *self {
            Interaction::Cosine { amplitude } => {
                let g = -TWO_PI * amplitude * (TWO_PI * (qx - qy)).sin();
                (g, -g)
            }
        }
    }

    /// Second derivatives `(xx, xy, yy)`.
    #[inline]
    pub fn hessian(&self, qx: f64, qy: f64) -> (f64, f64, f64) {
        match *self {
            Interaction::Cosine { amplitude } => {
                let h = -TWO_PI * TWO_PI * amplitude * (TWO_PI * (qx - qy)).cos();
                (h, -h, h)
            }
        }
    }

    /// Phase-space average of `w^2` under the uniform measure.
    pub fn mean_square(&self) -> f64 {
        match *self {
            Interaction::Cosine { amplitude } => 0.5 * amplitude * amplitude,
        }
    }
}

/// Full description of a coupled map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(default)]
    pub map: CatMapSpec,
    #[serde(default)]
    pub interaction: Interaction,
    #[serde(default = "default_topology")]
    pub topology: Topology,
    #[serde(default)]
    pub epsilon: f64,
}

fn default_topology() -> Topology {
    Topology::NearestNeighbourPeriodic
}

impl SystemSpec {
    /// Default map and observable on a nearest-neighbour ring of `l` sites.
    pub fn ring(l: usize, epsilon: f64) -> Self {
        SystemSpec {
            l,
            map: CatMapSpec::ARNOLD,
            interaction: Interaction::default(),
            topology: Topology::NearestNeighbourPeriodic,
            epsilon,
        }
    }

    pub fn with_topology(mut self, topology: Topology) -> Self {
        self.topology = topology;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.map.validate()?;
        if self.l == 0 {
            return Err(Error::InvalidArgument("L must be at least 1".into()));
        }
        if self.topology == Topology::NearestNeighbourPeriodic && self.l < 2 {
            return Err(Error::Topology(
                "nearest-neighbour-periodic requires L >= 2".into(),
            ));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Ordered site pairs carrying one copy of `w` each.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        match self.topology {
            Topology::NearestNeighbourPeriodic => {
                if self.l < 2 {
                    Vec::new()
                } else {
                    (0..self.l).map(|i| (i, (i + 1) % self.l)).collect()
                }
            }
            Topology::AllToAll => {
                let mut out = Vec::with_capacity(self.l * self.l.saturating_sub(1));
                for i in 0..self.l {
                    for j in 0..self.l {
                        if i != j {
                            out.push((i, j));
                        }
                    }
                }
                out
            }
        }
    }

    /// `V(q + offsets)` summed over bonds.
    pub fn potential(&self, q: &[f64], offsets: Option<&[f64]>) -> f64 {
        let mut v = 0.0;
        for (i, j) in self.bonds() {
            let (qi, qj) = shifted(q, offsets, i, j);
            v += self.interaction.value(qi, qj);
        }
        v
    }

    /// `grad V` with respect to positions.
    pub fn potential_gradient(&self, q: &[f64], offsets: Option<&[f64]>) -> Vec<f64> {
        let mut g = vec![0.0; q.len()];
        for (i, j) in self.bonds() {
            let (qi, qj) = shifted(q, offsets, i, j);
            let (gi, gj) = self.interaction.gradient(qi, qj);
            g[i] += gi;
            g[j] += gj;
        }
        g
    }

    /// Dense Hessian of `V`, row-major `L x L`.
    pub fn potential_hessian(&self, q: &[f64]) -> Vec<f64> {
        let l = q.len();
        let mut h = vec![0.0; l * l];
        for (i, j) in self.bonds() {
            let (hxx, hxy, hyy) = self.interaction.hessian(q[i], q[j]);
            h[i * l + i] += hxx;
            h[i * l + j] += hxy;
            h[j * l + i] += hxy;
            h[j * l + j] += hyy;
        }
        h
    }
}

#[inline]
fn shifted(q: &[f64], offsets: Option<&[f64]>, i: usize, j: usize) -> (f64, f64) {
    match offsets {
        Some(o) => (q[i] + o[i], q[j] + o[j]),
        None => (q[i], q[j]),
    }
}

/// Kick by `eps * grad V`, then a cat-map step on every site.
pub fn coupled_step(x: &ManyBodyPoint, spec: &SystemSpec) -> ManyBodyPoint {
    let mut sites = x.sites.clone();
    if spec.epsilon != 0.0 {
        let grad = spec.potential_gradient(&x.positions(), None);
        for (site, g) in sites.iter_mut().zip(grad) {
            site.p = wrap_unit(site.p + spec.epsilon * g);
        }
    }
    ManyBodyPoint::new(
        sites
            .into_iter()
            .map(|s| subsystem_step(s, &spec.map))
            .collect(),
    )
}

/// `d_eps W |_{eps=0}` at `x`, i.e. the pair observable summed over bonds.
pub fn interaction_derivative(x: &ManyBodyPoint, spec: &SystemSpec) -> f64 {
    spec.potential(&x.positions(), None)
}

/// Observable on the product torus, used by the Monte Carlo estimators.
pub trait SiteObservable: Sync {
    fn sites(&self) -> usize;
    fn eval(&self, x: &[TorusPoint]) -> f64;
}

impl SiteObservable for SystemSpec {
    fn sites(&self) -> usize {
        self.l
    }

    #[inline]
    fn eval(&self, x: &[TorusPoint]) -> f64 {
        let mut v = 0.0;
        for (i, j) in self.bonds() {
            v += self.interaction.value(x[i].q, x[j].q);
        }
        v
    }
}

/// A single copy of `w` between two sites.
#[derive(Debug, Clone, Copy)]
pub struct BondObservable(pub Interaction);

impl SiteObservable for BondObservable {
    fn sites(&self) -> usize {
        2
    }

    #[inline]
    fn eval(&self, x: &[TorusPoint]) -> f64 {
        self.0.value(x[0].q, x[1].q)
    }
}
