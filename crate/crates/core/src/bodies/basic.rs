//! Fixture bodies and generic wrappers.

use super::{BodyOracle, Descriptor, SupportValue};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, sub};
use crate::solver::{conic, GeneratorPolytope, ToleranceSpec};
use std::sync::Arc;

/// Euclidean ball `c + rB`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidConfig("ball radius must be positive".into()));
        }
        Ok(Self { center, radius })
    }

    pub fn unit(n: usize) -> Self {
        Self { center: vec![0.0; n], radius: 1.0 }
    }

    /// Volume of the unit ball in dimension `n`.
    pub fn unit_volume(n: usize) -> f64 {
        // π^{n/2} / Γ(n/2 + 1) through the two-step recursion V_n = 2π/n · V_{n−2}.
        let mut v = if n % 2 == 0 { 1.0 } else { 2.0 };
        let mut k = if n % 2 == 0 { 2 } else { 3 };
        while k <= n {
            v *= 2.0 * std::f64::consts::PI / k as f64;
            k += 2;
        }
        v
    }

    pub fn volume(&self) -> f64 {
        Self::unit_volume(self.center.len()) * self.radius.powi(self.center.len() as i32)
    }
}

impl BodyOracle for Ball {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor::Ball { r: self.radius }
    }

    fn gauge(&self, y: &[f64]) -> Result<f64> {
        let yy = dot(y, y);
        if yy == 0.0 {
            return Ok(0.0);
        }
        let yc = dot(y, &self.center);
        let a = self.radius * self.radius - dot(&self.center, &self.center);
        if a <= 0.0 {
            return Err(Error::OriginNotInterior);
        }
        // smallest τ with ‖y − τc‖ ≤ τr
        Ok((-yc + (yc * yc + a * yy).sqrt()) / a)
    }

    fn level(&self, y: &[f64]) -> Result<f64> {
        Ok(crate::linalg::dist(y, &self.center) / self.radius)
    }

    fn support(&self, d: &[f64]) -> Result<SupportValue> {
        Ok(SupportValue::exact(dot(&self.center, d) + self.radius * norm(d)))
    }

    fn support_point(&self, d: &[f64]) -> Result<Option<Vec<f64>>> {
        let nd = norm(d);
        Ok(Some(
            self.center
                .iter()
                .zip(d)
                .map(|(c, v)| if nd > 0.0 { c + self.radius * v / nd } else { *c })
                .collect(),
        ))
    }

    fn interior_point(&self) -> Vec<f64> {
        self.center.clone()
    }

    fn chord(&self, y: &[f64], u: &[f64]) -> Result<(f64, f64)> {
        let w = sub(y, &self.center);
        let a = dot(u, u);
        let b = dot(&w, u);
        let c = dot(&w, &w) - self.radius * self.radius;
        let disc = b * b - a * c;
        if disc < 0.0 || c > 1e-12 * self.radius * self.radius {
            return Err(Error::StartNotInterior);
        }
        let s = disc.sqrt();
        Ok(((-b - s) / a, (-b + s) / a))
    }
}

/// Axis-parallel box `[lo, hi]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cuboid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Cuboid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidConfig("box sides must have positive length".into()));
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(n: usize, half: f64) -> Result<Self> {
        Self::new(vec![-half; n], vec![half; n])
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

impl BodyOracle for Cuboid {
    fn dim(&self) -> usize {
        self.lo.len()
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor::Custom { name: "box".into() }
    }

    fn gauge(&self, y: &[f64]) -> Result<f64> {
        if self.lo.iter().zip(&self.hi).any(|(a, b)| *a >= 0.0 || *b <= 0.0) {
            return Err(Error::OriginNotInterior);
        }
        Ok(y.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (a, b))| if *v >= 0.0 { v / b } else { v / a })
            .fold(0.0, f64::max))
    }

    fn level(&self, y: &[f64]) -> Result<f64> {
        Ok(y.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (a, b))| (2.0 * v - a - b).abs() / (b - a))
            .fold(0.0, f64::max))
    }

    fn support(&self, d: &[f64]) -> Result<SupportValue> {
        Ok(SupportValue::exact(
            d.iter().zip(self.lo.iter().zip(&self.hi)).map(|(v, (a, b))| (v * a).max(v * b)).sum(),
        ))
    }

    fn interior_point(&self) -> Vec<f64> {
        self.center()
    }

    fn chord(&self, y: &[f64], u: &[f64]) -> Result<(f64, f64)> {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for k in 0..y.len() {
            if y[k] < self.lo[k] - 1e-12 || y[k] > self.hi[k] + 1e-12 {
                return Err(Error::StartNotInterior);
            }
            if u[k] != 0.0 {
                let (a, b) = ((self.lo[k] - y[k]) / u[k], (self.hi[k] - y[k]) / u[k]);
                lo = lo.max(a.min(b));
                hi = hi.min(a.max(b));
            }
        }
        Ok((lo.min(0.0), hi.max(0.0)))
    }
}

/// `{x : A x ≤ b}` with a known interior point.
#[derive(Clone, Debug, PartialEq)]
pub struct HPolytope {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub interior: Vec<f64>,
}

impl HPolytope {
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>, interior: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::InvalidConfig("constraint rows and bounds must match".into()));
        }
        for (row, bi) in a.iter().zip(&b) {
            if dot(row, &interior) >= *bi {
                return Err(Error::InvalidConfig("reference point is not interior".into()));
            }
        }
        Ok(Self { a, b, interior })
    }

    /// The box `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            a.push(e.clone());
            b.push(hi);
            e[k] = -1.0;
            a.push(e);
            b.push(-lo);
        }
        Self { a, b, interior: vec![0.5 * (lo + hi); n] }
    }

    fn gauge_about(&self, c: &[f64], y: &[f64]) -> f64 {
        let mut g = 0.0f64;
        for (row, bi) in self.a.iter().zip(&self.b) {
            let slack = bi - dot(row, c);
            g = g.max((dot(row, y) - dot(row, c)) / slack);
        }
        g
    }
}

impl BodyOracle for HPolytope {
    fn dim(&self) -> usize {
        self.interior.len()
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor::Custom { name: "h_polytope".into() }
    }

    fn gauge(&self, y: &[f64]) -> Result<f64> {
        if self.b.iter().any(|&b| b <= 0.0) {
            return Err(Error::OriginNotInterior);
        }
        Ok(self.gauge_about(&vec![0.0; self.dim()], y))
    }

    fn level(&self, y: &[f64]) -> Result<f64> {
        Ok(self.gauge_about(&self.interior, y))
    }

    fn support(&self, d: &[f64]) -> Result<SupportValue> {
        Ok(SupportValue::exact(conic::h_polytope_support(&self.a, &self.b, d)?.0))
    }

    fn interior_point(&self) -> Vec<f64> {
        self.interior.clone()
    }

    fn chord(&self, y: &[f64], u: &[f64]) -> Result<(f64, f64)> {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (row, bi) in self.a.iter().zip(&self.b) {
            let au = dot(row, u);
            let slack = bi - dot(row, y);
            if slack < -1e-12 {
                return Err(Error::StartNotInterior);
            }
            if au > 0.0 {
                hi = hi.min(slack / au);
            } else if au < 0.0 {
                lo = lo.max(slack / au);
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidConfig("polyhedron is unbounded along the chord".into()));
        }
        Ok((lo.min(0.0), hi.max(0.0)))
    }
}

/// `conv(vertices)`.
#[derive(Clone, Debug, PartialEq)]
pub struct VPolytope {
    pub vertices: Vec<Vec<f64>>,
    hull: GeneratorPolytope,
    centroid: Vec<f64>,
}

impl VPolytope {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let hull = GeneratorPolytope::new(vertices.clone(), false)?;
        let n = hull.dim();
        let mut centroid = vec![0.0; n];
        for v in &vertices {
            crate::linalg::axpy(&mut centroid, 1.0 / vertices.len() as f64, v);
        }
        Ok(Self { vertices, hull, centroid })
    }
}

impl BodyOracle for VPolytope {
    fn dim(&self) -> usize {
        self.hull.dim()
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor::Custom { name: "v_polytope".into() }
    }

    fn gauge(&self, y: &[f64]) -> Result<f64> {
        conic::gauge_polytope_lp(&self.hull, y, &ToleranceSpec::default())
    }

    fn level(&self, y: &[f64]) -> Result<f64> {
        // gauge about the vertex centroid
        let shifted: Vec<Vec<f64>> = self.vertices.iter().map(|v| sub(v, &self.centroid)).collect();
        let p = GeneratorPolytope::new(shifted, false)?;
        conic::gauge_polytope_lp(&p, &sub(y, &self.centroid), &ToleranceSpec::default())
    }

    fn support(&self, d: &[f64]) -> Result<SupportValue> {
        Ok(SupportValue::exact(self.hull.support(d)))
    }

    fn support_point(&self, d: &[f64]) -> Result<Option<Vec<f64>>> {
        Ok(Some(self.hull.vertex(self.hull.lmo_max(d).0)))
    }

    fn interior_point(&self) -> Vec<f64> {
        self.centroid.clone()
    }
}

/// `body + offset`.
#[derive(Clone)]
pub struct Translated {
    pub inner: Arc<dyn BodyOracle>,
    pub offset: Vec<f64>,
}

impl Translated {
    pub fn new(inner: Arc<dyn BodyOracle>, offset: Vec<f64>) -> Self {
        Self { inner, offset }
    }
}

impl BodyOracle for Translated {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor::Custom { name: "translated".into() }
    }

    fn gauge(&self, y: &[f64]) -> Result<f64> {
        // Exit distance from the origin along y, measured inside the untranslated body.
        let ny = norm(y);
        if ny == 0.0 {
            return Ok(0.0);
        }
        let start: Vec<f64> = self.offset.iter().map(|v| -v).collect();
        if self.inner.level(&start)? >= 1.0 {
            return Err(Error::OriginNotInterior);
        }
        let s = super::boundary_along(&*self.inner, &start, y)?;
        Ok(if s > 0.0 { 1.0 / s } else { f64::INFINITY })
    }

    fn level(&self, y: &[f64]) -> Result<f64> {
        self.inner.level(&sub(y, &self.offset))
    }

    fn support(&self, d: &[f64]) -> Result<SupportValue> {
        let h = self.inner.support(d)?;
        Ok(SupportValue { value: h.value + dot(&self.offset, d), ..h })
    }

    fn support_point(&self, d: &[f64]) -> Result<Option<Vec<f64>>> {
        Ok(self.inner.support_point(d)?.map(|p| crate::linalg::add(&p, &self.offset)))
    }

    fn interior_point(&self) -> Vec<f64> {
        crate::linalg::add(&self.inner.interior_point(), &self.offset)
    }

    fn chord(&self, y: &[f64], u: &[f64]) -> Result<(f64, f64)> {
        self.inner.chord(&sub(y, &self.offset), u)
    }
}

/// `λ · body` with `λ > 0`.
#[derive(Clone)]
pub struct Scaled {
    pub inner: Arc<dyn BodyOracle>,
    pub lambda: f64,
}

impl Scaled {
    pub fn new(inner: Arc<dyn BodyOracle>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidConfig("scale must be positive".into()));
        }
        Ok(Self { inner, lambda })
    }
}

impl BodyOracle for Scaled {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor::Custom { name: "scaled".into() }
    }

    fn gauge(&self, y: &[f64]) -> Result<f64> {
        Ok(self.inner.gauge(y)? / self.lambda)
    }

    fn level(&self, y: &[f64]) -> Result<f64> {
        let inv: Vec<f64> = y.iter().map(|v| v / self.lambda).collect();
        self.inner.level(&inv)
    }

    fn support(&self, d: &[f64]) -> Result<SupportValue> {
        let h = self.inner.support(d)?;
        Ok(SupportValue { value: self.lambda * h.value, ..h })
    }

    fn support_point(&self, d: &[f64]) -> Result<Option<Vec<f64>>> {
        Ok(self.inner.support_point(d)?.map(|p| p.iter().map(|v| v * self.lambda).collect()))
    }

    fn interior_point(&self) -> Vec<f64> {
        self.inner.interior_point().iter().map(|v| v * self.lambda).collect()
    }

    fn chord(&self, y: &[f64], u: &[f64]) -> Result<(f64, f64)> {
        let inv: Vec<f64> = y.iter().map(|v| v / self.lambda).collect();
        let (a, b) = self.inner.chord(&inv, u)?;
        Ok((a * self.lambda, b * self.lambda))
    }
}
