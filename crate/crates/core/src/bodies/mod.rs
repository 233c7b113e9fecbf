//! Convex bodies as oracles: gauge, support, membership and chords.

mod basic;
mod cones;
mod design_bodies;
mod lifted;

pub use basic::{Ball, Cuboid, HPolytope, Scaled, Translated, VPolytope};
pub use cones::{ConeKind, ConeOracle, PRIME_CAP};
pub use design_bodies::{CrossSection, QBody, QtBody, QtPolarBody};
pub use lifted::LiftedHull;

use crate::design::QuasiOrthogonalSystem;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::solver::{classify, Membership};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Descriptor {
    Q,
    Qt { t: f64 },
    QtPolar { t: f64 },
    K,
    KEta { eta: f64 },
    KEtaKappa { eta: f64, kappa: f64 },
    ConePlus { eta: f64 },
    ConeMinus { eta: f64 },
    ConeMinusPrime { eta: f64 },
    CrossSection { s: f64 },
    Ball { r: f64 },
    Custom { name: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportValue {
    pub value: f64,
    /// Set when `value` is only a certified upper bound.
    pub upper_bound_only: bool,
}

impl SupportValue {
    pub fn exact(value: f64) -> Self {
        Self { value, upper_bound_only: false }
    }
}

/// A point `y₀e₀ + y_⊥` of `ℝ^{1+n}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedPoint {
    pub y0: f64,
    pub y_perp: Vec<f64>,
}

impl LiftedPoint {
    pub fn new(y0: f64, y_perp: Vec<f64>) -> Self {
        Self { y0, y_perp }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + self.y_perp.len());
        v.push(self.y0);
        v.extend_from_slice(&self.y_perp);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self { y0: v[0], y_perp: v[1..].to_vec() }
    }

    pub fn dot(&self, other: &LiftedPoint) -> f64 {
        self.y0 * other.y0 + dot(&self.y_perp, &other.y_perp)
    }
}

/// A convex body given by evaluators.
///
/// `gauge` is taken about the origin and may be `+∞`. `level` is a convex
/// function whose unit sublevel set is the body; it is the gauge unless the
/// origin is not interior, in which case a body picks another reference center.
pub trait BodyOracle: Send + Sync {
    fn dim(&self) -> usize;

    fn descriptor(&self) -> Descriptor;

    fn gauge(&self, y: &[f64]) -> Result<f64>;

    fn support(&self, d: &[f64]) -> Result<SupportValue>;

    /// Supports at the rows of a row-major `rows × dim` block.
    fn support_batch(&self, ds: &[f64], rows: usize) -> Result<Vec<SupportValue>> {
        let n = self.dim();
        (0..rows).map(|r| self.support(&ds[r * n..(r + 1) * n])).collect()
    }

    fn level(&self, y: &[f64]) -> Result<f64> {
        self.gauge(y)
    }

    fn membership(&self, y: &[f64], tol: f64) -> Result<Membership> {
        Ok(classify(self.level(y)?, tol))
    }

    fn interior_point(&self) -> Vec<f64> {
        vec![0.0; self.dim()]
    }

    /// `(s₋, s₊)` with `s₋ ≤ 0 ≤ s₊` bounding the chord `{y + s u}` through a point `y` of the body.
    fn chord(&self, y: &[f64], u: &[f64]) -> Result<(f64, f64)> {
        let up = boundary_along(self, y, u)?;
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        let down = boundary_along(self, y, &neg)?;
        Ok((-down, up))
    }

    /// A point of the body attaining the support value, when cheaply available.
    fn support_point(&self, _d: &[f64]) -> Result<Option<Vec<f64>>> {
        Ok(None)
    }

    /// Directions every approximation report must include.
    fn test_directions(&self) -> Vec<Vec<f64>> {
        Vec::new()
    }
}

impl<T: BodyOracle + ?Sized> BodyOracle for Arc<T> {
    fn support_batch(&self, ds: &[f64], rows: usize) -> Result<Vec<SupportValue>> {
        (**self).support_batch(ds, rows)
    }

    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn descriptor(&self) -> Descriptor {
        (**self).descriptor()
    }
    fn gauge(&self, y: &[f64]) -> Result<f64> {
        (**self).gauge(y)
    }
    fn support(&self, d: &[f64]) -> Result<SupportValue> {
        (**self).support(d)
    }
    fn level(&self, y: &[f64]) -> Result<f64> {
        (**self).level(y)
    }
    fn membership(&self, y: &[f64], tol: f64) -> Result<Membership> {
        (**self).membership(y, tol)
    }
    fn interior_point(&self) -> Vec<f64> {
        (**self).interior_point()
    }
    fn chord(&self, y: &[f64], u: &[f64]) -> Result<(f64, f64)> {
        (**self).chord(y, u)
    }
    fn support_point(&self, d: &[f64]) -> Result<Option<Vec<f64>>> {
        (**self).support_point(d)
    }
    fn test_directions(&self) -> Vec<Vec<f64>> {
        (**self).test_directions()
    }
}

/// Largest `s ≥ 0` with `level(y + s u) ≤ 1`, by bracketing and the Illinois
/// variant of regula falsi on the convex function `level − 1`.
pub fn boundary_along<B: BodyOracle + ?Sized>(body: &B, y: &[f64], u: &[f64]) -> Result<f64> {
    let un = norm(u);
    if un == 0.0 {
        return Err(Error::InvalidConfig("zero chord direction".into()));
    }
    let at = |s: f64| -> Result<f64> {
        let p: Vec<f64> = y.iter().zip(u).map(|(a, b)| a + s * b).collect();
        Ok(body.level(&p)? - 1.0)
    };
    let f0 = at(0.0)?;
    if f0 > 1e-9 {
        return Err(Error::StartNotInterior);
    }
    let h = body.support(u)?.value;
    let mut hi = if h.is_finite() {
        ((h - dot(y, u)) / (un * un)).max(0.0) * (1.0 + 1e-9) + 1e-12
    } else {
        1.0
    };
    let mut fhi = at(hi)?;
    let mut grow = 0;
    while fhi <= 0.0 {
        if h.is_finite() {
            // The support bound is attained: the chord ends on a supporting plane.
            return Ok(hi);
        }
        hi *= 2.0;
        grow += 1;
        if grow > 80 {
            return Err(Error::InvalidConfig("body is unbounded along the chord".into()));
        }
        fhi = at(hi)?;
    }
    let (mut lo, mut flo) = (0.0f64, f0.min(0.0));
    let scale = hi.max(1e-300);
    let mut side = 0i8;
    for _ in 0..300 {
        if hi - lo <= 1e-13 * scale {
            return Ok(lo);
        }
        let x = if fhi.is_finite() && flo.is_finite() && fhi != flo {
            let r = lo - flo * (hi - lo) / (fhi - flo);
            if r > lo && r < hi { r } else { 0.5 * (lo + hi) }
        } else {
            0.5 * (lo + hi)
        };
        let fx = at(x)?;
        if fx.abs() <= 1e-13 {
            return Ok(x);
        }
        if fx <= 0.0 {
            lo = x;
            flo = fx;
            if side == -1 && fhi.is_finite() {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(lo)
}

/// Parameters of `K(η, κ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardBodyParams {
    pub system: QuasiOrthogonalSystem,
    pub eta: f64,
    pub kappa: f64,
    pub t: f64,
}

impl HardBodyParams {
    pub fn new(system: QuasiOrthogonalSystem, eta: f64, kappa: f64) -> Self {
        Self { system, eta, kappa, t: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta < 1.0) || !self.eta.is_finite() {
            return Err(Error::InvalidConfig(format!("eta must be below 1, got {}", self.eta)));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::InvalidConfig(format!("kappa must be positive, got {}", self.kappa)));
        }
        Ok(())
    }
}

pub fn build_q(system: &QuasiOrthogonalSystem) -> Result<QBody> {
    QBody::new(system)
}

pub fn build_qt(system: &QuasiOrthogonalSystem, t: f64) -> Result<QtBody> {
    QtBody::new(system, t)
}

pub fn build_qt_polar(system: &QuasiOrthogonalSystem, t: f64) -> Result<QtPolarBody> {
    QtPolarBody::new(system, t)
}

pub fn build_k_eta_kappa(params: &HardBodyParams) -> Result<LiftedHull> {
    params.validate()?;
    LiftedHull::k_eta_kappa(&params.system, params.eta, params.kappa)
}

pub fn cone_oracle(kind: ConeKind, system: &QuasiOrthogonalSystem, eta: f64, t: f64) -> Result<ConeOracle> {
    ConeOracle::new(kind, system, eta, t)
}

pub fn cross_section(system: &QuasiOrthogonalSystem, s: f64) -> Result<CrossSection> {
    CrossSection::new(system, s)
}

#[cfg(test)]
mod tests;
