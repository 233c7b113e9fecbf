//! `Q`, `Q_t`, `Q_t°` and the cross-sections `sQ + (1 − s)Q₁°`.

use super::{BodyOracle, Descriptor, SupportValue};
use crate::design::QuasiOrthogonalSystem;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::solver::pencil::{pencil_gauge, Pencil};
use crate::solver::{conic, gauge_polytope, support_polar_cap, GeneratorPolytope, ToleranceSpec};
use std::sync::Arc;

pub(crate) fn q_polytope(system: &QuasiOrthogonalSystem) -> Result<Arc<GeneratorPolytope>> {
    if !crate::design::verify_design(system).passed {
        log::warn!("building bodies from a design that fails verification");
    }
    Ok(Arc::new(GeneratorPolytope::new(system.vectors.clone(), true)?))
}

/// Generators that can cut the ball in `tQ° ∩ rB`.
pub(crate) fn long_generators(q: &GeneratorPolytope, t: f64, radius: f64) -> Vec<usize> {
    (0..q.len()).filter(|&i| radius * q.generator_norms()[i] > t).collect()
}

/// `Q = conv{±x_i}`.
#[derive(Clone, Debug)]
pub struct QBody {
    pub q: Arc<GeneratorPolytope>,
    pub tol: ToleranceSpec,
}

impl QBody {
    pub fn new(system: &QuasiOrthogonalSystem) -> Result<Self> {
        Ok(Self { q: q_polytope(system)?, tol: ToleranceSpec::default() })
    }

    pub fn from_polytope(q: Arc<GeneratorPolytope>) -> Self {
        Self { q, tol: ToleranceSpec::default() }
    }
}

impl BodyOracle for QBody {
    fn dim(&self) -> usize {
        self.q.dim()
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor::Q
    }

    fn gauge(&self, y: &[f64]) -> Result<f64> {
        gauge_polytope(&self.q, y, &self.tol)
    }

    fn support(&self, d: &[f64]) -> Result<SupportValue> {
        Ok(SupportValue::exact(self.q.support(d)))
    }

    fn support_batch(&self, ds: &[f64], rows: usize) -> Result<Vec<SupportValue>> {
        Ok(self.q.support_batch(ds, rows).into_iter().map(SupportValue::exact).collect())
    }

    fn support_point(&self, d: &[f64]) -> Result<Option<Vec<f64>>> {
        Ok(Some(self.q.vertex(self.q.lmo_max(d).0)))
    }
}

/// `Q_t = conv(Q/t ∪ B)`.
#[derive(Clone, Debug)]
pub struct QtBody {
    pub q: Arc<GeneratorPolytope>,
    pub t: f64,
    pub tol: ToleranceSpec,
}

impl QtBody {
    pub fn new(system: &QuasiOrthogonalSystem, t: f64) -> Result<Self> {
        Self::from_polytope(q_polytope(system)?, t)
    }

    pub fn from_polytope(q: Arc<GeneratorPolytope>, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::NonPositiveT(t));
        }
        Ok(Self { q, t, tol: ToleranceSpec::default() })
    }
}

impl BodyOracle for QtBody {
    fn dim(&self) -> usize {
        self.q.dim()
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor::Qt { t: self.t }
    }

    /// `gauge_{Q_t} = h_{tQ° ∩ B}`.
    fn gauge(&self, y: &[f64]) -> Result<f64> {
        Ok(support_polar_cap(&self.q, self.t, 1.0, y, &self.tol)?.value)
    }

    fn support(&self, d: &[f64]) -> Result<SupportValue> {
        Ok(SupportValue::exact((self.q.support(d) / self.t).max(norm(d))))
    }

    fn support_batch(&self, ds: &[f64], rows: usize) -> Result<Vec<SupportValue>> {
        let n = self.dim();
        let hq = self.q.support_batch(ds, rows);
        Ok(hq
            .into_iter()
            .enumerate()
            .map(|(r, h)| SupportValue::exact((h / self.t).max(norm(&ds[r * n..(r + 1) * n]))))
            .collect())
    }

    fn support_point(&self, d: &[f64]) -> Result<Option<Vec<f64>>> {
        let (k, h) = self.q.lmo_max(d);
        let nd = norm(d);
        Ok(Some(if h / self.t >= nd {
            self.q.vertex(k).iter().map(|v| v / self.t).collect()
        } else if nd > 0.0 {
            d.iter().map(|v| v / nd).collect()
        } else {
            vec![0.0; d.len()]
        }))
    }
}

/// `Q_t° = tQ° ∩ B`.
#[derive(Clone, Debug)]
pub struct QtPolarBody {
    pub q: Arc<GeneratorPolytope>,
    pub t: f64,
    pub tol: ToleranceSpec,
}

impl QtPolarBody {
    pub fn new(system: &QuasiOrthogonalSystem, t: f64) -> Result<Self> {
        Self::from_polytope(q_polytope(system)?, t)
    }

    pub fn from_polytope(q: Arc<GeneratorPolytope>, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return Err(Error::NonPositiveT(t));
        }
        Ok(Self { q, t, tol: ToleranceSpec::default() })
    }
}

impl BodyOracle for QtPolarBody {
    fn dim(&self) -> usize {
        self.q.dim()
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor::QtPolar { t: self.t }
    }

    fn gauge(&self, y: &[f64]) -> Result<f64> {
        Ok(norm(y).max(self.q.support(y) / self.t))
    }

    fn support(&self, d: &[f64]) -> Result<SupportValue> {
        Ok(SupportValue::exact(support_polar_cap(&self.q, self.t, 1.0, d, &self.tol)?.value))
    }

    fn support_point(&self, d: &[f64]) -> Result<Option<Vec<f64>>> {
        Ok(Some(support_polar_cap(&self.q, self.t, 1.0, d, &self.tol)?.maximizer))
    }

    fn chord(&self, y: &[f64], u: &[f64]) -> Result<(f64, f64)> {
        let a = dot(u, u);
        let b = dot(y, u);
        let c = dot(y, y) - 1.0;
        let disc = b * b - a * c;
        if disc < 0.0 || c > 1e-12 {
            return Err(Error::StartNotInterior);
        }
        let s = disc.sqrt();
        let (mut lo, mut hi) = ((-b - s) / a, (-b + s) / a);
        for i in 0..self.q.len() {
            let g = self.q.generator(i);
            let (gy, gu) = (dot(g, y), dot(g, u));
            if gu != 0.0 {
                let r1 = (self.t - gy) / gu;
                let r2 = (-self.t - gy) / gu;
                hi = hi.min(r1.max(r2));
                lo = lo.max(r1.min(r2));
            }
        }
        if lo > 1e-12 || hi < -1e-12 {
            return Err(Error::StartNotInterior);
        }
        Ok((lo.min(0.0), hi.max(0.0)))
    }
}

/// `K_s = sQ + (1 − s)Q₁°`, the slice of `K` at height `s`.
#[derive(Clone, Debug)]
pub struct CrossSection {
    pub q: Arc<GeneratorPolytope>,
    pub s: f64,
    long: Vec<usize>,
    pub tol: ToleranceSpec,
}

impl CrossSection {
    pub fn new(system: &QuasiOrthogonalSystem, s: f64) -> Result<Self> {
        Self::from_polytope(q_polytope(system)?, s)
    }

    pub fn from_polytope(q: Arc<GeneratorPolytope>, s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidConfig(format!("cross-section height must lie in [0, 1], got {s}")));
        }
        let long = long_generators(&q, 1.0, 1.0);
        Ok(Self { q, s, long, tol: ToleranceSpec::default() })
    }
}

impl BodyOracle for CrossSection {
    fn dim(&self) -> usize {
        self.q.dim()
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor::CrossSection { s: self.s }
    }

    fn gauge(&self, y: &[f64]) -> Result<f64> {
        if self.s == 1.0 {
            return gauge_polytope(&self.q, y, &self.tol);
        }
        if self.s == 0.0 {
            return Ok(norm(y).max(self.q.support(y)));
        }
        // Height s about center s is exactly the slice gauge.
        if self.long.is_empty() {
            pencil_gauge(&self.q, y, Pencil::two_level(1.0, 0.0, 1.0, self.s, self.s), &self.tol)
        } else {
            conic::two_level_gauge_socp(&self.q, &self.long, 1.0, 0.0, 1.0, self.s, self.s, y)
        }
    }

    fn support(&self, d: &[f64]) -> Result<SupportValue> {
        let hq = self.q.support(d);
        let hc = support_polar_cap(&self.q, 1.0, 1.0, d, &self.tol)?.value;
        Ok(SupportValue::exact(self.s * hq + (1.0 - self.s) * hc))
    }
}
