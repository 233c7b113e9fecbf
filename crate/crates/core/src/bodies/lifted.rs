//! The two-level hulls `conv(top·e₀ + Q, bottom·e₀ + ρQ₁°)`, which include
//! `K`, `K(η)`, `K(η, κ)` and their translates along `e₀`.

use super::design_bodies::{long_generators, q_polytope};
use super::{BodyOracle, Descriptor, SupportValue};
use crate::design::QuasiOrthogonalSystem;
use crate::error::{Error, Result};
use crate::solver::pencil::{pencil_gauge, Pencil, TwoLevel};
use crate::solver::{conic, support_polar_cap, GeneratorPolytope, ToleranceSpec};
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct LiftedHull {
    pub q: Arc<GeneratorPolytope>,
    pub top: f64,
    pub bottom: f64,
    pub rho: f64,
    /// Generators that cut the ball in `Q₁°`; empty means `Q₁° = B`.
    pub long: Vec<usize>,
    /// `√n / Δ` of the underlying design, used for test directions.
    pub unit: f64,
    pub descriptor: Descriptor,
    pub tol: ToleranceSpec,
}

impl LiftedHull {
    pub fn new(
        q: Arc<GeneratorPolytope>,
        unit: f64,
        top: f64,
        bottom: f64,
        rho: f64,
        descriptor: Descriptor,
    ) -> Result<Self> {
        if !(top > bottom) {
            return Err(Error::InvalidConfig(format!("top {top} must exceed bottom {bottom}")));
        }
        if !(rho > 0.0) {
            return Err(Error::InvalidConfig("bottom scale must be positive".into()));
        }
        let long = long_generators(&q, 1.0, 1.0);
        Ok(Self { q, top, bottom, rho, long, unit, descriptor, tol: ToleranceSpec::default() })
    }

    /// `K(η, κ) = conv((1 − η)e₀ + Q, −κηe₀ + κQ₁°)`.
    pub fn k_eta_kappa(system: &QuasiOrthogonalSystem, eta: f64, kappa: f64) -> Result<Self> {
        Self::from_polytope(q_polytope(system)?, system.unit(), eta, kappa)
    }

    pub fn from_polytope(q: Arc<GeneratorPolytope>, unit: f64, eta: f64, kappa: f64) -> Result<Self> {
        if !(eta < 1.0) {
            return Err(Error::InvalidConfig(format!("eta must be below 1, got {eta}")));
        }
        let descriptor = if eta == 0.0 && kappa == 1.0 {
            Descriptor::K
        } else if kappa == 1.0 {
            Descriptor::KEta { eta }
        } else {
            Descriptor::KEtaKappa { eta, kappa }
        };
        Self::new(q, unit, 1.0 - eta, -kappa * eta, kappa, descriptor)
    }

    /// This body translated by `−h·e₀`.
    pub fn shifted(&self, h: f64) -> Self {
        Self {
            top: self.top - h,
            bottom: self.bottom - h,
            descriptor: Descriptor::Custom { name: format!("{:?} shifted by {h}", self.descriptor) },
            ..self.clone()
        }
    }

    pub fn n(&self) -> usize {
        self.q.dim()
    }

    pub fn ball_bottom(&self) -> bool {
        self.long.is_empty()
    }

    /// Gauge of `body − c·e₀` evaluated at `y − c·e₀`; needs `bottom ≤ c < top`.
    pub fn gauge_about(&self, c: f64, y: &[f64]) -> Result<f64> {
        if !(c >= self.bottom && c < self.top) {
            return Err(Error::OriginNotInterior);
        }
        let (y0, yp) = (y[0], &y[1..]);
        if self.ball_bottom() {
            pencil_gauge(&self.q, yp, Pencil::two_level(self.top, self.bottom, self.rho, c, y0), &self.tol)
        } else {
            conic::two_level_gauge_socp(&self.q, &self.long, self.top, self.bottom, self.rho, c, y0, yp)
        }
    }

    pub fn center_height(&self) -> f64 {
        if self.bottom < 0.0 && self.top > 0.0 {
            0.0
        } else {
            0.5 * (self.top + self.bottom)
        }
    }

    /// `h_{Q₁°}` of the bottom face before scaling.
    pub fn bottom_support(&self, d: &[f64]) -> Result<f64> {
        if self.ball_bottom() {
            Ok(crate::linalg::norm(d))
        } else {
            Ok(support_polar_cap(&self.q, 1.0, 1.0, d, &self.tol)?.value)
        }
    }

    /// The test directions `x⁻_{i,σ} = −2(√n/Δ)e₀ + σx_i`, both signs per index.
    pub fn minus_vectors(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(2 * self.q.len());
        for i in 0..self.q.len() {
            for s in [1.0, -1.0] {
                let mut v = Vec::with_capacity(1 + self.n());
                v.push(-2.0 * self.unit);
                v.extend(self.q.generator(i).iter().map(|x| s * x));
                out.push(v);
            }
        }
        out
    }
}

impl BodyOracle for LiftedHull {
    fn dim(&self) -> usize {
        self.q.dim() + 1
    }

    fn descriptor(&self) -> Descriptor {
        self.descriptor.clone()
    }

    fn gauge(&self, y: &[f64]) -> Result<f64> {
        self.gauge_about(0.0, y)
    }

    fn level(&self, y: &[f64]) -> Result<f64> {
        self.gauge_about(self.center_height(), y)
    }

    fn support(&self, d: &[f64]) -> Result<SupportValue> {
        let (d0, dp) = (d[0], &d[1..]);
        let upper = self.top * d0 + self.q.support(dp);
        let lower = self.bottom * d0 + self.rho * self.bottom_support(dp)?;
        Ok(SupportValue::exact(upper.max(lower)))
    }

    fn support_point(&self, d: &[f64]) -> Result<Option<Vec<f64>>> {
        let (d0, dp) = (d[0], &d[1..]);
        let (k, hq) = self.q.lmo_max(dp);
        let cap = support_polar_cap(&self.q, 1.0, 1.0, dp, &self.tol)?;
        let mut p = Vec::with_capacity(self.dim());
        if self.top * d0 + hq >= self.bottom * d0 + self.rho * cap.value {
            p.push(self.top);
            p.extend(self.q.vertex(k));
        } else {
            p.push(self.bottom);
            p.extend(cap.maximizer.iter().map(|v| self.rho * v));
        }
        Ok(Some(p))
    }

    fn interior_point(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        p[0] = 0.5 * (self.top + self.bottom);
        p
    }

    fn chord(&self, y: &[f64], u: &[f64]) -> Result<(f64, f64)> {
        if !self.ball_bottom() {
            let up = super::boundary_along(self, y, u)?;
            let neg: Vec<f64> = u.iter().map(|v| -v).collect();
            return Ok((-super::boundary_along(self, y, &neg)?, up));
        }
        let body = TwoLevel { p: &self.q, top: self.top, bottom: self.bottom, rho: self.rho };
        let up = body.exit_distance(y[0], &y[1..], u[0], &u[1..], &self.tol)?;
        let neg: Vec<f64> = u.iter().map(|v| -v).collect();
        let down = body.exit_distance(y[0], &y[1..], neg[0], &neg[1..], &self.tol)?;
        Ok((-down, up))
    }

    fn test_directions(&self) -> Vec<Vec<f64>> {
        self.minus_vectors()
    }
}
