//! Phase-space points on the two-torus and linear cat maps acting on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduces `x` into `[0, 1)` with a floor-based remainder.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    // x slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// A point `(q, p)` of the unit torus, both coordinates in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub q: f64,
    pub p: f64,
}

impl TorusPoint {
    pub fn new(q: f64, p: f64) -> Self {
        TorusPoint {
            q: wrap_unit(q),
            p: wrap_unit(p),
        }
    }
}

/// A point of the L-fold product torus, one [`TorusPoint`] per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManyBodyPoint {
    pub sites: Vec<TorusPoint>,
}

impl ManyBodyPoint {
    pub fn new(sites: Vec<TorusPoint>) -> Self {
        ManyBodyPoint { sites }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.sites.iter().map(|s| s.q).collect()
    }
}

/// Integer matrix `[[a, b], [c, d]]` of a hyperbolic toral automorphism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatMapSpec {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl Default for CatMapSpec {
    fn default() -> Self {
        CatMapSpec::ARNOLD
    }
}

impl CatMapSpec {
    /// `[[2, 1], [1, 1]]`
    pub const ARNOLD: CatMapSpec = CatMapSpec {
        a: 2,
        b: 1,
        c: 1,
        d: 1,
    };

    /// Builds a map, checking unit determinant and hyperbolicity.
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        let m = CatMapSpec { a, b, c, d };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason| Error::InvalidMap {
            a: self.a,
            b: self.b,
            c: self.c,
            d: self.d,
            reason,
        };
        if self.a * self.d - self.b * self.c != 1 {
            return Err(fail("determinant must be 1"));
        }
        if (self.a + self.d).abs() <= 2 {
            return Err(fail("|trace| must exceed 2"));
        }
        Ok(())
    }

    pub fn trace(&self) -> i64 {
        self.a + self.d
    }

    pub fn inverse(&self) -> CatMapSpec {
        CatMapSpec {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    /// Expanding eigenvalue `|λ| > 1`.
    pub fn lyapunov_multiplier(&self) -> f64 {
        let tr = self.trace() as f64;
        (tr.abs() + (tr * tr - 4.0).sqrt()) / 2.0
    }

    pub fn as_matrix(&self) -> [[i64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }
}

/// One step of the cat map on a torus point.
pub fn subsystem_step(x: TorusPoint, m: &CatMapSpec) -> TorusPoint {
    TorusPoint {
        q: wrap_unit(m.a as f64 * x.q + m.b as f64 * x.p),
        p: wrap_unit(m.c as f64 * x.q + m.d as f64 * x.p),
    }
}

/// Point of the dyadic lattice `(2^-64 Z / Z)^2`.
///
/// Integer cat maps send this lattice to itself, so orbits are computed exactly
/// with wrapping arithmetic and the uniform measure on the lattice is exactly
/// invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LatticePoint {
    pub q: u64,
    pub p: u64,
}

const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

impl LatticePoint {
    #[inline]
    pub fn step(self, m: &CatMapSpec) -> LatticePoint {
        LatticePoint {
            q: (m.a as u64)
                .wrapping_mul(self.q)
                .wrapping_add((m.b as u64).wrapping_mul(self.p)),
            p: (m.c as u64)
                .wrapping_mul(self.q)
                .wrapping_add((m.d as u64).wrapping_mul(self.p)),
        }
    }

    #[inline]
    pub fn q_f64(self) -> f64 {
        (self.q >> 11) as f64 * INV_2_53
    }

    #[inline]
    pub fn p_f64(self) -> f64 {
        (self.p >> 11) as f64 * INV_2_53
    }

    pub fn to_torus(self) -> TorusPoint {
        TorusPoint {
            q: self.q_f64(),
            p: self.p_f64(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_is_fixed() {
        let x = subsystem_step(TorusPoint::new(0.0, 0.0), &CatMapSpec::ARNOLD);
        assert_eq!(x, TorusPoint::new(0.0, 0.0));
    }

    #[test]
    fn half_point() {
        let x = subsystem_step(TorusPoint::new(0.5, 0.5), &CatMapSpec::ARNOLD);
        assert_eq!(x.q, 0.5);
        assert_eq!(x.p, 0.0);
    }

    #[test]
    fn inverse_step_round_trip() {
        let m = CatMapSpec::ARNOLD;
        let inv = m.inverse();
        for &(q, p) in &[(0.1, 0.2), (0.73, 0.01), (0.999, 0.5)] {
            let x = TorusPoint::new(q, p);
            let y = subsystem_step(subsystem_step(x, &m), &inv);
            let dq = (y.q - x.q).abs().min(1.0 - (y.q - x.q).abs());
            let dp = (y.p - x.p).abs().min(1.0 - (y.p - x.p).abs());
            assert!(dq < 1e-14 && dp < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_maps() {
        assert!(CatMapSpec::new(2, 1, 1, 2).is_err());
        assert!(CatMapSpec::new(1, 1, 0, 1).is_err());
        assert!(CatMapSpec::new(3, 1, 2, 1).is_ok());
    }

    #[test]
    fn wrap_stays_in_unit_interval() {
        for &x in &[-1e-17, -0.5, 3.0, 1.0 - 1e-17, -3.25] {
            let r = wrap_unit(x);
            assert!((0.0..1.0).contains(&r), "{x} -> {r}");
        }
    }

    #[test]
    fn lattice_step_inverts() {
        let m = CatMapSpec::ARNOLD;
        let x = LatticePoint {
            q: 0x1234_5678_9abc_def0,
            p: 0x0fed_cba9_8765_4321,
        };
        assert_eq!(x.step(&m).step(&m.inverse()), x);
    }
}
