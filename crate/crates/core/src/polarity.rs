//! Polar bodies, the polar-shift identity for `K(η)`, and vertex/facet duality.

use crate::bodies::{BodyOracle, Descriptor, HardBodyParams, LiftedHull, SupportValue};
use crate::design::QuasiOrthogonalSystem;
use crate::error::{Error, Result};
use crate::hardness::{hull_for, CandidatePolytope};
use crate::linalg::{dot, lu_solve, norm};
use crate::rng::{unit_vector, StreamFactory};
use crate::solver::conic;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Distance from the ends of the admissible shift range that is rejected.
pub const ENDPOINT_GUARD: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarShiftResult {
    /// `(1 − (1 − η)h) / (1 + ηh)`
    pub kappa: f64,
    /// `1 / (1 − (1 − η)h)`
    pub scale: f64,
}

/// `(K(η)° − h·e₀)° = scale · K(η, κ)`.
pub fn polar_shift(eta: f64, h: f64) -> Result<PolarShiftResult> {
    if !(0.0..1.0).contains(&eta) || !h.is_finite() {
        return Err(Error::HOutOfRange { eta, h });
    }
    let hi = 1.0 / (1.0 - eta);
    if h >= hi - ENDPOINT_GUARD {
        return Err(Error::HOutOfRange { eta, h });
    }
    if eta > 0.0 && h <= -1.0 / eta + ENDPOINT_GUARD {
        return Err(Error::HOutOfRange { eta, h });
    }
    let num = 1.0 - (1.0 - eta) * h;
    Ok(PolarShiftResult { kappa: num / (1.0 + eta * h), scale: 1.0 / num })
}

/// Directions probed for `h_L > 0` before building a polar.
const ORIGIN_PROBES: usize = 64;

/// `L° = {y : h_L(y) ≤ 1}` for a body with the origin in its interior.
#[derive(Clone)]
pub struct PolarBody {
    pub inner: Arc<dyn BodyOracle>,
}

impl std::fmt::Debug for PolarBody {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PolarBody").field("inner", &self.inner.descriptor()).finish()
    }
}

impl PolarBody {
    pub fn new(inner: Arc<dyn BodyOracle>) -> Result<Self> {
        let n = inner.dim();
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for k in 0..n {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; n];
                e[k] = s;
                dirs.push(e);
            }
        }
        let f = StreamFactory::new(0, "origin-probe");
        dirs.extend((0..ORIGIN_PROBES).map(|i| unit_vector(&mut f.rng(i as u64), n)));
        for d in &dirs {
            if !(inner.support(d)?.value > 1e-12) {
                return Err(Error::OriginNotInterior);
            }
        }
        Ok(Self { inner })
    }
}

pub fn polar_oracle(body: Arc<dyn BodyOracle>) -> Result<PolarBody> {
    PolarBody::new(body)
}

impl BodyOracle for PolarBody {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor::Custom { name: format!("polar of {:?}", self.inner.descriptor()) }
    }

    fn gauge(&self, y: &[f64]) -> Result<f64> {
        Ok(self.inner.support(y)?.value)
    }

    fn support(&self, d: &[f64]) -> Result<SupportValue> {
        Ok(SupportValue::exact(self.inner.gauge(d)?))
    }

    fn support_batch(&self, ds: &[f64], rows: usize) -> Result<Vec<SupportValue>> {
        let n = self.dim();
        (0..rows).map(|r| self.support(&ds[r * n..(r + 1) * n])).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarShiftReport {
    pub eta: f64,
    pub h: f64,
    pub kappa: f64,
    pub scale: f64,
    pub n_points: usize,
    pub disagreements: usize,
    pub disagreement_fraction: f64,
    /// Largest relative gap between the two boundary radii along a sampled ray.
    pub max_radius_gap: f64,
}

/// Samples points near the boundary and compares membership in
/// `(K(η)° − h·e₀)°`, through `gauge_{K(η)}(y) ≤ 1 + h·y₀`, with membership in
/// `scale · K(η, κ)` from the body oracle.
pub fn verify_polar_shift(
    system: &QuasiOrthogonalSystem,
    eta: f64,
    h: f64,
    n_points: usize,
    seed: u64,
    tol: f64,
) -> Result<PolarShiftReport> {
    let shift = polar_shift(eta, h)?;
    let k_eta = hull_for(&HardBodyParams::new(system.clone(), eta, 1.0))?;
    let k_kappa = hull_for(&HardBodyParams::new(system.clone(), eta, shift.kappa))?;
    let dim = system.n + 1;
    let factory = StreamFactory::new(seed, "polar-shift");
    let rows: Vec<Result<(bool, f64)>> = (0..n_points)
        .into_par_iter()
        .map(|i| {
            let mut rng = factory.rng(i as u64);
            let u = unit_vector(&mut rng, dim);
            let g_right = k_kappa.gauge(&u)?;
            let r_right = shift.scale / g_right;
            let denom = k_eta.gauge(&u)? - h * u[0];
            let r_left = if denom > 0.0 { 1.0 / denom } else { f64::INFINITY };
            let gap = (r_left - r_right).abs() / r_right;
            // radial offsets within ±5% of the right-hand boundary
            let rad = r_right * (1.0 + 0.05 * (2.0 * rng.random::<f64>() - 1.0));
            let y: Vec<f64> = u.iter().map(|v| rad * v).collect();
            let left = k_eta.gauge(&y)? - h * y[0] - 1.0;
            let right = k_kappa.gauge(&y.iter().map(|v| v / shift.scale).collect::<Vec<_>>())? - 1.0;
            let disagree = (left < -tol && right > tol) || (left > tol && right < -tol);
            Ok((disagree, gap))
        })
        .collect();
    let mut disagreements = 0;
    let mut max_gap: f64 = 0.0;
    for r in rows {
        let (d, g) = r?;
        disagreements += d as usize;
        max_gap = max_gap.max(g);
    }
    Ok(PolarShiftReport {
        eta,
        h,
        kappa: shift.kappa,
        scale: shift.scale,
        n_points,
        disagreements,
        disagreement_fraction: disagreements as f64 / n_points.max(1) as f64,
        max_radius_gap: max_gap,
    })
}

/// The bound `κ ≤ 2(1 + 10 ln(2e))` over `η ∈ [0, 10/(n+1)]`, `h ∈ [−10 ln(2e), 0]`.
pub fn kappa_bound() -> f64 {
    2.0 * (1.0 + 10.0 * (2.0 * std::f64::consts::E).ln())
}

/// Largest dimension for exact facet enumeration.
pub const MAX_DUAL_DIM: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCount {
    pub dim: usize,
    pub facet_count: usize,
    pub polar_vertex_count: usize,
    pub counts_match: bool,
}

/// Facets of `P`, each as the normal `a` of its hyperplane `⟨a, x⟩ = 1`.
///
/// Every affinely independent `d`-subset spans a hyperplane, with normal from
/// the cofactor expansion of the edge vectors; it is a facet when all points lie
/// on one side. The origin must be interior so the offset is nonzero.
pub fn facets(points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = points.first().map(|p| p.len()).unwrap_or(0);
    let mut found: Vec<Vec<f64>> = Vec::new();
    for_each_subset(points.len(), d, &mut |idx| {
        let p0 = &points[idx[0]];
        let edges: Vec<Vec<f64>> = idx[1..].iter().map(|&i| crate::linalg::sub(&points[i], p0)).collect();
        let normal = cofactor_normal(&edges, d);
        let nn = norm(&normal);
        let scale = edges.iter().map(|e| norm(e)).fold(1.0, f64::max);
        if nn <= 1e-10 * scale.powi(d as i32 - 1) {
            return;
        }
        let b = dot(&normal, p0);
        let tol = 1e-9 * nn * (1.0 + norm(p0));
        let above = points.iter().any(|p| dot(&normal, p) > b + tol);
        let below = points.iter().any(|p| dot(&normal, p) < b - tol);
        if above && below || b.abs() <= tol {
            return;
        }
        push_unique(&mut found, normal.iter().map(|v| v / b).collect());
    });
    Ok(found)
}

/// Normal to the span of `d − 1` vectors in `ℝ^d` by cofactor expansion.
fn cofactor_normal(edges: &[Vec<f64>], d: usize) -> Vec<f64> {
    if d == 1 {
        return vec![1.0];
    }
    (0..d)
        .map(|k| {
            let minor: Vec<f64> = edges
                .iter()
                .flat_map(|e| e.iter().enumerate().filter(|(c, _)| *c != k).map(|(_, v)| *v))
                .collect();
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            s * det(minor, d - 1)
        })
        .collect()
}

/// Determinant by Gaussian elimination with partial pivoting.
fn det(mut a: Vec<f64>, n: usize) -> f64 {
    let mut out = 1.0;
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs())).unwrap();
        if a[piv * n + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for k in 0..n {
                a.swap(piv * n + k, c * n + k);
            }
            out = -out;
        }
        let p = a[c * n + c];
        out *= p;
        for r in c + 1..n {
            let f = a[r * n + c] / p;
            for k in c..n {
                a[r * n + k] -= f * a[c * n + k];
            }
        }
    }
    out
}

/// Vertices of `{y : ⟨v, y⟩ ≤ 1 for every v}`, enumerated from the constraints alone.
pub fn polar_vertices(points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    // Same linear systems as `facets`, read the other way: a vertex of the
    // polar is a feasible point where d linearly independent constraints bind.
    let d = points.first().map(|p| p.len()).unwrap_or(0);
    let mut found: Vec<Vec<f64>> = Vec::new();
    for_each_subset(points.len(), d, &mut |idx| {
        let rows: Vec<f64> = idx.iter().flat_map(|&i| points[i].iter().copied()).collect();
        if crate::linalg::rank(&idx.iter().map(|&i| points[i].clone()).collect::<Vec<_>>(), 1e-10) < d {
            return;
        }
        let Some(y) = lu_solve(&rows, &vec![1.0; d], d, 1e-10) else {
            return;
        };
        let feasible = points.iter().all(|p| dot(p, &y) <= 1.0 + 1e-9 * (1.0 + norm(&y)));
        if feasible {
            push_unique(&mut found, y);
        }
    });
    Ok(found)
}

fn push_unique(found: &mut Vec<Vec<f64>>, v: Vec<f64>) {
    let tol = 1e-7 * (1.0 + norm(&v));
    if !found.iter().any(|f| crate::linalg::dist(f, &v) <= tol) {
        found.push(v);
    }
}

fn for_each_subset(n: usize, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == 0 || k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Facet count of `P` against the vertex count of `P°`.
pub fn dual_count(p: &CandidatePolytope) -> Result<DualCount> {
    let dim = p.dim();
    if dim > MAX_DUAL_DIM {
        return Err(Error::DimensionTooLarge(dim));
    }
    let pts = p.points();
    if conic::interior_margin(&pts, &vec![0.0; dim])? <= 1e-9 {
        return Err(Error::OriginNotInterior);
    }
    let f = facets(&pts)?;
    let v = polar_vertices(&pts)?;
    Ok(DualCount { dim, facet_count: f.len(), polar_vertex_count: v.len(), counts_match: f.len() == v.len() })
}

/// Builds `K(η)` for polar checks.
pub fn k_eta(system: &QuasiOrthogonalSystem, eta: f64) -> Result<LiftedHull> {
    hull_for(&HardBodyParams::new(system.clone(), eta, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::{Ball, Scaled, VPolytope};
    use crate::bodies::build_q;
    use crate::rng::{gaussian_vec, stream};
    use crate::solver::Membership;

    fn axes() -> QuasiOrthogonalSystem {
        QuasiOrthogonalSystem::from_vectors(vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1.0).unwrap()
    }

    #[test]
    fn polar_shift_examples() {
        let r = polar_shift(0.0, 0.0).unwrap();
        assert_eq!((r.kappa, r.scale), (1.0, 1.0));
        let r = polar_shift(0.1, 0.5).unwrap();
        assert_eq!(r.kappa, (1.0 - 0.9 * 0.5) / 1.05);
        assert!((r.kappa - 0.523_809_523_809_523_8).abs() <= f64::EPSILON);
        assert!((r.scale - 1.0 / 0.55).abs() <= 2.0 * f64::EPSILON);
        let r = polar_shift(0.0, -1.0).unwrap();
        assert_eq!((r.kappa, r.scale), (2.0, 0.5));
        assert!(matches!(polar_shift(0.1, 1.0 / 0.9), Err(Error::HOutOfRange { .. })));
        assert!(matches!(polar_shift(0.1, 1.0 / 0.9 - 1e-10), Err(Error::HOutOfRange { .. })));
        assert!(matches!(polar_shift(0.5, -2.0), Err(Error::HOutOfRange { .. })));
        assert!(polar_shift(0.0, -1e6).is_ok());
    }

    #[test]
    fn shift_identity_holds_to_an_ulp() {
        for eta in [0.0, 0.05, 0.1, 0.25, 0.5] {
            for h in [-3.0, -1.0, -0.2, 0.0, 0.3, 0.9] {
                if let Ok(r) = polar_shift(eta, h) {
                    let lhs = r.kappa * (1.0 + eta * h);
                    let rhs = 1.0 - (1.0 - eta) * h;
                    assert!((lhs - rhs).abs() <= f64::EPSILON * rhs.abs().max(1.0), "{eta} {h}");
                }
            }
        }
    }

    #[test]
    fn kappa_bound_on_grid() {
        let bound = kappa_bound();
        // needs 1 + ηh ≥ 1/2 across the grid, which first holds at n = 338
        let first = (20.0 * 10.0 * (2.0 * std::f64::consts::E).ln() - 1.0).ceil() as usize;
        assert_eq!(first, 338);
        let worst = polar_shift(10.0 / 65.0, -10.0 * (2.0 * std::f64::consts::E).ln()).map(|r| r.kappa);
        assert!(worst.map_or(true, |k| k > bound), "small n should exceed the bound");
        for n in [first, 512, 1000, 4096] {
            let top = 10.0 / (n as f64 + 1.0);
            for a in 0..=20 {
                let eta = top * a as f64 / 20.0;
                if eta >= 1.0 {
                    continue;
                }
                for b in 0..=20 {
                    let h = -10.0 * (2.0 * std::f64::consts::E).ln() * b as f64 / 20.0;
                    if let Ok(r) = polar_shift(eta, h) {
                        assert!(r.kappa <= bound + 1e-12, "n {n} eta {eta} h {h}: {}", r.kappa);
                    }
                }
            }
        }
    }

    #[test]
    fn polar_examples() {
        let r = 2.0;
        let ball: Arc<dyn BodyOracle> = Arc::new(Ball::new(vec![0.0; 3], r).unwrap());
        let p = polar_oracle(ball.clone()).unwrap();
        let mut rng = stream(1, "polar", 0);
        for _ in 0..10 {
            let u = unit_vector(&mut rng, 3);
            let y: Vec<f64> = u.iter().map(|v| v / r).collect();
            assert_eq!(p.membership(&y, 1e-9).unwrap(), Membership::Boundary);
        }
        let q: Arc<dyn BodyOracle> = Arc::new(build_q(&axes()).unwrap());
        let qp = polar_oracle(q).unwrap();
        assert_eq!(qp.membership(&[1.0, 1.0], 1e-9).unwrap(), Membership::Boundary);
        assert_eq!(qp.membership(&[0.9, -0.9], 1e-9).unwrap(), Membership::Inside);
        let off: Arc<dyn BodyOracle> = Arc::new(Ball::new(vec![2.0, 0.0], 1.0).unwrap());
        assert!(matches!(polar_oracle(off), Err(Error::OriginNotInterior)));
    }

    #[test]
    fn double_polar_of_disk() {
        let disk: Arc<dyn BodyOracle> = Arc::new(Ball::unit(2));
        let p: Arc<dyn BodyOracle> = Arc::new(polar_oracle(disk).unwrap());
        let pp = polar_oracle(p).unwrap();
        let mut rng = stream(2, "double", 0);
        for _ in 0..100 {
            let u = unit_vector(&mut rng, 2);
            let (_, hi) = pp.chord(&[0.0, 0.0], &u).unwrap();
            assert!((hi - 1.0).abs() < 1e-6, "{hi}");
        }
    }

    #[test]
    fn polar_scale_covariance() {
        let q: Arc<dyn BodyOracle> = Arc::new(build_q(&crate::design::generate_design(&crate::design::DesignConfig::desk(4, 10, 1)).unwrap()).unwrap());
        let lam = 2.5;
        let big: Arc<dyn BodyOracle> = Arc::new(Scaled::new(q.clone(), lam).unwrap());
        let a = polar_oracle(q).unwrap();
        let b = polar_oracle(big).unwrap();
        let mut rng = stream(3, "cov", 0);
        for _ in 0..50 {
            let y = gaussian_vec(&mut rng, 4);
            let ga = a.gauge(&y).unwrap();
            let gb = b.gauge(&y).unwrap();
            assert!((gb - lam * ga).abs() <= 1e-8 * gb.abs().max(1.0));
            let sa = a.support(&y).unwrap().value;
            let sb = b.support(&y).unwrap().value;
            assert!((sb - sa / lam).abs() <= 1e-8 * sa.abs().max(1.0));
        }
    }

    #[test]
    fn polar_shift_zero_is_identity() {
        let rep = verify_polar_shift(&axes(), 0.1, 0.0, 500, 1, 1e-6).unwrap();
        assert_eq!(rep.disagreements, 0);
        assert!(rep.max_radius_gap < 1e-9);
    }

    #[test]
    fn polar_shift_small_example() {
        let rep = verify_polar_shift(&axes(), 0.25, 0.5, 2000, 2, 1e-6).unwrap();
        assert!(rep.disagreement_fraction <= 0.002, "{rep:?}");
        assert!(rep.max_radius_gap < 1e-6, "{rep:?}");
    }

    #[test]
    fn dual_count_examples() {
        let square = CandidatePolytope::from_points(
            &[vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, -1.0]],
            "square",
        )
        .unwrap();
        let c = dual_count(&square).unwrap();
        assert_eq!((c.facet_count, c.polar_vertex_count), (4, 4));
        let mut cross = Vec::new();
        for k in 0..3 {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; 3];
                e[k] = s;
                cross.push(e);
            }
        }
        let c = dual_count(&CandidatePolytope::from_points(&cross, "cross").unwrap()).unwrap();
        assert_eq!((c.facet_count, c.polar_vertex_count), (8, 8));
        // interior points are not vertices and change nothing
        cross.push(vec![0.1, 0.1, 0.1]);
        let c = dual_count(&CandidatePolytope::from_points(&cross, "cross+").unwrap()).unwrap();
        assert_eq!(c.facet_count, 8);
        let off = CandidatePolytope::from_points(&[vec![1.0, 1.0], vec![2.0, 1.0], vec![1.0, 2.0]], "off").unwrap();
        assert!(matches!(dual_count(&off), Err(Error::OriginNotInterior)));
        let big = CandidatePolytope::from_points(&[vec![0.0; 9]], "big").unwrap();
        assert!(matches!(dual_count(&big), Err(Error::DimensionTooLarge(9))));
    }

    #[test]
    fn simplicial_facets_obey_euler() {
        // random points in ℝ³ give a simplicial hull, so F = 2V − 4
        for seed in 0..10 {
            let mut rng = stream(seed, "euler", 0);
            let pts: Vec<Vec<f64>> = (0..20).map(|_| gaussian_vec(&mut rng, 3)).collect();
            let f = facets(&pts).unwrap();
            let verts = pts.iter().filter(|p| f.iter().any(|a| (dot(a, p) - 1.0).abs() < 1e-9)).count();
            assert_eq!(f.len(), 2 * verts - 4, "seed {seed}");
        }
    }

    #[test]
    fn determinant_examples() {
        assert_eq!(det(vec![2.0, 0.0, 0.0, 3.0], 2), 6.0);
        assert_eq!(det(vec![0.0, 1.0, 1.0, 0.0], 2), -1.0);
        assert_eq!(det(vec![1.0, 2.0, 2.0, 4.0], 2), 0.0);
    }

    #[test]
    fn facets_match_polytope_support() {
        // every facet is a supporting hyperplane of the hull
        let mut rng = stream(4, "facets", 0);
        let pts: Vec<Vec<f64>> = (0..20).map(|_| gaussian_vec(&mut rng, 3)).collect();
        let f = facets(&pts).unwrap();
        let v = VPolytope::new(pts.clone()).unwrap();
        for a in &f {
            assert!((v.support(a).unwrap().value - 1.0).abs() < 1e-9);
        }
    }
}
