//! The cones `C₊`, `C₋` and the truncated cone `C₋′` bounding `K(η)` and its polar.

use super::design_bodies::q_polytope;
use super::{BodyOracle, Descriptor, SupportValue};
use crate::design::QuasiOrthogonalSystem;
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::solver::{gauge_polytope, support_polar_cap, GeneratorPolytope, ToleranceSpec};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Height cap of `C₋′`.
pub const PRIME_CAP: f64 = 0.98;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    /// `y_⊥ ∈ (1 − (1−η)y₀) Q°`
    CPlus,
    /// `y_⊥ ∈ (1 + ηy₀) Q₁`; the cylinder over `Q₁` at `η = 0`
    CMinus,
    /// `y₀ ≤ 0.98` and `y_⊥ ∈ (1 + ηy₀) Q_t°`
    CMinusPrime,
}

#[derive(Clone, Debug)]
pub struct ConeOracle {
    pub kind: ConeKind,
    pub q: Arc<GeneratorPolytope>,
    pub eta: f64,
    pub t: f64,
    pub tol: ToleranceSpec,
}

impl ConeOracle {
    pub fn new(kind: ConeKind, system: &QuasiOrthogonalSystem, eta: f64, t: f64) -> Result<Self> {
        Self::from_polytope(kind, q_polytope(system)?, eta, t)
    }

    pub fn from_polytope(kind: ConeKind, q: Arc<GeneratorPolytope>, eta: f64, t: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eta) {
            return Err(Error::InvalidConfig(format!("eta must lie in [0, 1), got {eta}")));
        }
        if !(t > 0.0) {
            return Err(Error::NonPositiveT(t));
        }
        Ok(Self { kind, q, eta, t, tol: ToleranceSpec::default() })
    }

    /// `gauge_{Q₁} = h_{Q₁°}`.
    fn gauge_q1(&self, v: &[f64]) -> Result<f64> {
        Ok(support_polar_cap(&self.q, 1.0, 1.0, v, &self.tol)?.value)
    }

    /// `gauge_{Q_t°}(v) = max(‖v‖, h_Q(v)/t)`.
    fn gauge_qt_polar(&self, v: &[f64]) -> f64 {
        norm(v).max(self.q.support(v) / self.t)
    }
}

impl BodyOracle for ConeOracle {
    fn dim(&self) -> usize {
        self.q.dim() + 1
    }

    fn descriptor(&self) -> Descriptor {
        match self.kind {
            ConeKind::CPlus => Descriptor::ConePlus { eta: self.eta },
            ConeKind::CMinus => Descriptor::ConeMinus { eta: self.eta },
            ConeKind::CMinusPrime => Descriptor::ConeMinusPrime { eta: self.eta },
        }
    }

    fn gauge(&self, y: &[f64]) -> Result<f64> {
        let (y0, yp) = (y[0], &y[1..]);
        let eta = self.eta;
        Ok(match self.kind {
            ConeKind::CPlus => (self.q.support(yp) + (1.0 - eta) * y0).max(0.0),
            ConeKind::CMinus => (self.gauge_q1(yp)? - eta * y0).max(0.0),
            ConeKind::CMinusPrime => (self.gauge_qt_polar(yp) - eta * y0).max(y0 / PRIME_CAP).max(0.0),
        })
    }

    /// Sections are scaled copies of one base, so the support is the maximum of
    /// a function linear in the height and is attained at an end of the height range.
    fn support(&self, d: &[f64]) -> Result<SupportValue> {
        let (d0, dp) = (d[0], &d[1..]);
        let eta = self.eta;
        let zero = dp.iter().all(|v| *v == 0.0);
        let value = match self.kind {
            ConeKind::CPlus => {
                // section (1 − (1−η)y₀) Q°, apex at y₀ = 1/(1−η)
                let hq_polar = if zero { 0.0 } else { gauge_polytope(&self.q, dp, &self.tol)? };
                if d0 - (1.0 - eta) * hq_polar >= 0.0 {
                    d0 / (1.0 - eta)
                } else {
                    f64::INFINITY
                }
            }
            ConeKind::CMinus => {
                let hq1 = self.q.support(dp).max(norm(dp));
                if eta == 0.0 {
                    if d0 == 0.0 {
                        hq1
                    } else {
                        f64::INFINITY
                    }
                } else if d0 + eta * hq1 <= 0.0 {
                    -d0 / eta
                } else {
                    f64::INFINITY
                }
            }
            ConeKind::CMinusPrime => {
                let hqt = support_polar_cap(&self.q, self.t, 1.0, dp, &self.tol)?.value;
                let at_cap = PRIME_CAP * d0 + (1.0 + PRIME_CAP * eta) * hqt;
                if eta == 0.0 {
                    if d0 >= 0.0 {
                        at_cap
                    } else {
                        f64::INFINITY
                    }
                } else {
                    at_cap.max(-d0 / eta)
                }
            }
        };
        Ok(SupportValue::exact(value))
    }
}
