//! Convex-analysis kernels shared by every body oracle: generator polytopes,
//! their gauges and projections, support of a polytope-polar cap, and the
//! membership band classifier.

pub mod conic;
pub mod minnorm;
pub mod pencil;

use crate::bodies::BodyOracle;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

pub use minnorm::{project, Projection};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub feasibility_tol: f64,
    pub bisection_tol: f64,
    pub max_iterations: usize,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self { feasibility_tol: 1e-9, bisection_tol: 1e-10, max_iterations: 10_000 }
    }
}

/// `conv(generators)`, or `conv(±generators)` when `symmetric`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorPolytope {
    pub generators: Vec<Vec<f64>>,
    pub symmetric: bool,
    flat: Vec<f64>,
    norms: Vec<f64>,
    n: usize,
}

impl GeneratorPolytope {
    pub fn new(generators: Vec<Vec<f64>>, symmetric: bool) -> Result<Self> {
        let n = generators.first().map(|g| g.len()).unwrap_or(0);
        if n == 0 {
            return Err(Error::InvalidConfig("a generator polytope needs at least one generator".into()));
        }
        if let Some(g) = generators.iter().find(|g| g.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: g.len() });
        }
        let flat = generators.iter().flatten().copied().collect();
        let norms = generators.iter().map(|g| norm(g)).collect();
        Ok(Self { generators, symmetric, flat, norms, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// Number of signed vertices: `2m` when symmetric.
    pub fn vertex_count(&self) -> usize {
        if self.symmetric {
            2 * self.len()
        } else {
            self.len()
        }
    }

    #[inline]
    pub fn generator(&self, i: usize) -> &[f64] {
        &self.flat[i * self.n..(i + 1) * self.n]
    }

    pub fn generator_norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn max_norm(&self) -> f64 {
        self.norms.iter().fold(0.0, |a, &b| a.max(b))
    }

    /// Splits a signed vertex index into generator index and sign.
    #[inline]
    pub fn signed(&self, k: usize) -> (usize, f64) {
        if k < self.len() {
            (k, 1.0)
        } else {
            (k - self.len(), -1.0)
        }
    }

    /// `out += w · P_k`
    #[inline]
    pub fn add_vertex(&self, out: &mut [f64], k: usize, w: f64) {
        let (i, s) = self.signed(k);
        axpy(out, s * w, self.generator(i));
    }

    pub fn vertex(&self, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.n];
        self.add_vertex(&mut v, k, 1.0);
        v
    }

    /// Vertex maximizing `⟨P_k, d⟩` and the maximum.
    pub fn lmo_max(&self, d: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..self.len() {
            let v = dot(self.generator(i), d);
            if v > best.1 {
                best = (i, v);
            }
            if self.symmetric && -v > best.1 {
                best = (i + self.len(), -v);
            }
        }
        best
    }

    /// Vertex minimizing `⟨P_k, x⟩` and the minimum.
    pub fn lmo_min(&self, x: &[f64]) -> (usize, f64) {
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let (k, v) = self.lmo_max(&neg);
        (k, -v)
    }

    pub fn nearest_vertex(&self, z: &[f64]) -> usize {
        // argmin ‖P_k − z‖² = argmax ⟨P_k, z⟩ − ‖P_k‖²/2
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..self.len() {
            let v = dot(self.generator(i), z);
            let half = 0.5 * self.norms[i] * self.norms[i];
            if v - half > best.1 {
                best = (i, v - half);
            }
            if self.symmetric && -v - half > best.1 {
                best = (i + self.len(), -v - half);
            }
        }
        best.0
    }

    pub fn support(&self, d: &[f64]) -> f64 {
        self.lmo_max(d).1
    }

    /// Supports at many directions through one matrix product; `ds` is row-major, `rows × n`.
    pub fn support_batch(&self, ds: &[f64], rows: usize) -> Vec<f64> {
        let d = ArrayView2::from_shape((rows, self.n), ds).expect("direction block shape");
        let g = ArrayView2::from_shape((self.len(), self.n), &self.flat).expect("generator shape");
        let prod = d.dot(&g.t());
        prod.outer_iter()
            .map(|row| {
                row.iter().fold(f64::NEG_INFINITY, |a, &v| if self.symmetric { a.max(v.abs()) } else { a.max(v) })
            })
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.generators[i].clone()).collect(), self.symmetric)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(
            self.generators.iter().map(|g| g.iter().map(|x| x * s).collect()).collect(),
            self.symmetric,
        )
        .expect("scaling keeps shape")
    }

    pub fn rank(&self) -> usize {
        crate::linalg::rank(&self.generators, 1e-12)
    }
}

pub fn support_polytope(p: &GeneratorPolytope, d: &[f64]) -> f64 {
    p.support(d)
}

/// `min{t ≥ 0 : y ∈ t P}`, or `+∞` when `y` is outside the cone spanned by `P`.
///
/// Symmetric polytopes use Newton's method on `τ ↦ dist(y, τP)` with
/// min-norm-point projections; others go through the linear program in [`conic`].
pub fn gauge_polytope(p: &GeneratorPolytope, y: &[f64], tol: &ToleranceSpec) -> Result<f64> {
    if !p.symmetric {
        return conic::gauge_polytope_lp(p, y, tol);
    }
    let ny = norm(y);
    if ny == 0.0 {
        return Ok(0.0);
    }
    let h = p.support(y);
    if h <= 1e-14 * ny * p.max_norm() {
        return Ok(f64::INFINITY);
    }
    // ⟨y, y⟩ ≤ gauge(y) · h_P(y) gives a starting point below the root.
    let mut tau = ny * ny / h;
    let mut warm: Vec<usize> = Vec::new();
    for _ in 0..tol.max_iterations {
        let z: Vec<f64> = y.iter().map(|v| v / tau).collect();
        let proj = project(p, &z, &warm, tol)?;
        let dist = tau * proj.dist;
        if dist <= 1e-13 * ny {
            return Ok(tau);
        }
        let mut slope = 0.0;
        for k in 0..p.dim() {
            slope += (y[k] - tau * proj.point[k]) * proj.point[k];
        }
        slope /= dist;
        if slope <= 1e-14 * p.max_norm() {
            return Ok(f64::INFINITY);
        }
        let step = dist / slope;
        tau += step;
        warm = proj.corral;
        if step <= tol.bisection_tol * 1e-2 * tau {
            return Ok(tau);
        }
    }
    Err(Error::IterationLimit("polytope gauge"))
}

/// Support of a polytope-polar cap.
#[derive(Clone, Debug, PartialEq)]
pub struct CapSupport {
    /// Certified upper bound on `h_{tP° ∩ rB}(d)`.
    pub value: f64,
    /// `⟨z, d⟩` for the feasible point `z` below.
    pub lower: f64,
    pub maximizer: Vec<f64>,
}

/// `h_{tP° ∩ r B}(d)`, evaluated through the inf-convolution
/// `min_τ≥0 [tτ + r·dist(d, τP)]`.
///
/// Generators with `r‖g‖ ≤ t` cannot cut the ball and are dropped first.
pub fn support_polar_cap(
    p: &GeneratorPolytope,
    t: f64,
    radius: f64,
    d: &[f64],
    tol: &ToleranceSpec,
) -> Result<CapSupport> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveT(t));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidConfig("cap radius must be positive".into()));
    }
    let nd = norm(d);
    if nd == 0.0 {
        return Ok(CapSupport { value: 0.0, lower: 0.0, maximizer: vec![0.0; d.len()] });
    }
    let long: Vec<usize> = (0..p.len()).filter(|&i| radius * p.generator_norms()[i] > t).collect();
    let ball = CapSupport { value: radius * nd, lower: radius * nd, maximizer: d.iter().map(|v| radius * v / nd).collect() };
    if long.is_empty() {
        return Ok(ball);
    }
    let pl = p.subset(&long)?;
    if t - radius * pl.support(d) / nd >= 0.0 {
        return Ok(ball);
    }

    let slab = |z: &[f64]| -> f64 { pl.support(z) };
    let mut best = ball.value;
    let mut lower = f64::NEG_INFINITY;
    let mut maximizer = vec![0.0; d.len()];
    let mut consider = |res: &[f64], rnorm: f64| {
        let mut z: Vec<f64> = res.iter().map(|v| radius * v / rnorm).collect();
        let s = slab(&z);
        if s > t {
            z.iter_mut().for_each(|v| *v *= t / s);
        }
        let val = dot(&z, d);
        if val > lower {
            lower = val;
            maximizer = z;
        }
    };
    consider(d, nd);

    let (mut lo, mut hi) = (0.0f64, radius * nd / t);
    let mut warm: Vec<usize> = Vec::new();
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let tau = 0.5 * (lo + hi);
        let z: Vec<f64> = d.iter().map(|v| v / tau).collect();
        let proj = project(&pl, &z, &warm, tol)?;
        warm = proj.corral.clone();
        let dist = tau * proj.dist;
        best = best.min(t * tau + radius * dist);
        let deriv = if dist > 1e-12 * nd {
            let res: Vec<f64> = d.iter().zip(&proj.point).map(|(a, q)| a - tau * q).collect();
            consider(&res, dist);
            t - radius * dot(&res, &proj.point) / dist
        } else {
            t
        };
        if deriv >= 0.0 {
            hi = tau;
        } else {
            lo = tau;
        }
    }
    Ok(CapSupport { value: best.max(lower), lower, maximizer })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Inside,
    Outside,
    Boundary,
}

/// Band classification of a gauge-like level.
pub fn classify(level: f64, tol: f64) -> Membership {
    if level <= 1.0 - tol {
        Membership::Inside
    } else if level >= 1.0 - tol && level <= 1.0 + tol {
        Membership::Boundary
    } else {
        Membership::Outside
    }
}

pub fn membership_bisect(oracle: &dyn BodyOracle, y: &[f64], tol: f64) -> Result<Membership> {
    Ok(classify(oracle.gauge(y)?, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_vec, stream};
    use proptest::prelude::*;

    fn cross2() -> GeneratorPolytope {
        GeneratorPolytope::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], true).unwrap()
    }

    #[test]
    fn cross_polytope_gauge_is_l1() {
        let t = ToleranceSpec::default();
        let p = cross2();
        assert!((gauge_polytope(&p, &[0.5, 0.0], &t).unwrap() - 0.5).abs() < 1e-12);
        assert!((gauge_polytope(&p, &[1.0, 1.0], &t).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(gauge_polytope(&p, &[0.0, 0.0], &t).unwrap(), 0.0);
    }

    #[test]
    fn gauge_outside_span_is_infinite() {
        let p = GeneratorPolytope::new(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], true).unwrap();
        let t = ToleranceSpec::default();
        assert_eq!(gauge_polytope(&p, &[0.3, 0.2, 0.5], &t).unwrap(), f64::INFINITY);
        assert_eq!(gauge_polytope(&p, &[0.0, 0.0, 1.0], &t).unwrap(), f64::INFINITY);
    }

    #[test]
    fn polytope_support_examples() {
        assert_eq!(support_polytope(&cross2(), &[3.0, 4.0]), 4.0);
        assert_eq!(support_polytope(&cross2(), &[0.0, 0.0]), 0.0);
        let g = vec![1.5, -2.0];
        let single = GeneratorPolytope::new(vec![g.clone()], false).unwrap();
        assert_eq!(support_polytope(&single, &[-1.5, 2.0]), -dot(&g, &g));
    }

    #[test]
    fn polar_cap_examples() {
        let t = ToleranceSpec::default();
        let r = support_polar_cap(&cross2(), 1.0, 1.0, &[3.0, 4.0], &t).unwrap();
        assert!((r.value - 5.0).abs() < 1e-12);
        let big = GeneratorPolytope::new(vec![vec![2.0, 0.0], vec![0.0, 2.0]], true).unwrap();
        let a = support_polar_cap(&big, 1.0, 1.0, &[1.0, 0.0], &t).unwrap();
        assert!((a.value - 0.5).abs() < 1e-9, "{a:?}");
        let b = support_polar_cap(&big, 1.0, 1.0, &[1.0, 1.0], &t).unwrap();
        assert!((b.value - 1.0).abs() < 1e-9, "{b:?}");
        assert!(b.lower <= b.value + 1e-12 && b.value - b.lower < 1e-6);
    }

    #[test]
    fn classify_band() {
        assert_eq!(classify(0.5, 1e-9), Membership::Inside);
        assert_eq!(classify(1.0, 1e-9), Membership::Boundary);
        assert_eq!(classify(5.0, 1e-9), Membership::Outside);
        assert_eq!(classify(f64::INFINITY, 1e-9), Membership::Outside);
    }

    fn random_polytope(seed: u64, n: usize, m: usize, sym: bool) -> GeneratorPolytope {
        let mut rng = stream(seed, "solver-test", 0);
        GeneratorPolytope::new((0..m).map(|_| gaussian_vec(&mut rng, n)).collect(), sym).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn gauge_is_homogeneous_and_matches_lp(seed in 0u64..5000, n in 2usize..6, extra in 0usize..12, lambda in 0.1f64..10.0) {
            let p = random_polytope(seed, n, n + extra, true);
            let mut rng = stream(seed, "solver-test-y", 0);
            let y = gaussian_vec(&mut rng, n);
            let t = ToleranceSpec::default();
            let g = gauge_polytope(&p, &y, &t).unwrap();
            let gl = conic::gauge_polytope_lp(&p, &y, &t).unwrap();
            prop_assert!((g - gl).abs() <= 1e-6 * (1.0 + g), "newton {g} vs lp {gl}");
            let ys: Vec<f64> = y.iter().map(|v| v * lambda).collect();
            let gs = gauge_polytope(&p, &ys, &t).unwrap();
            prop_assert!((gs - lambda * g).abs() <= 1e-8 * lambda * g);
        }

        #[test]
        fn gauge_support_duality(seed in 0u64..5000, n in 2usize..5, extra in 0usize..8) {
            let p = random_polytope(seed, n, n + extra, true);
            let mut rng = stream(seed, "solver-dual", 0);
            let y = gaussian_vec(&mut rng, n);
            let d = gaussian_vec(&mut rng, n);
            let t = ToleranceSpec::default();
            let g = gauge_polytope(&p, &y, &t).unwrap();
            // ⟨y, d⟩ ≤ gauge_P(y) · h_P(d)
            prop_assert!(dot(&y, &d) <= g * support_polytope(&p, &d) + 1e-8);
            // h_{P°} = gauge_P, with the left side from the polar linear program.
            let hpolar = conic::support_of_polar(&p, &d).unwrap();
            let gd = gauge_polytope(&p, &d, &t).unwrap();
            prop_assert!((hpolar - gd).abs() <= 1e-7 * (1.0 + gd), "{hpolar} vs {gd}");
        }

        #[test]
        fn cap_support_below_both_supports(seed in 0u64..5000, n in 2usize..5, extra in 0usize..8, t in 0.2f64..2.0, r in 0.3f64..2.0) {
            let p = random_polytope(seed, n, n + extra, true);
            let mut rng = stream(seed, "solver-cap", 0);
            let tolspec = ToleranceSpec::default();
            for _ in 0..8 {
                let d = gaussian_vec(&mut rng, n);
                let cap = support_polar_cap(&p, t, r, &d, &tolspec).unwrap();
                let ha = t * conic::support_of_polar(&p, &d).unwrap();
                let hb = r * norm(&d);
                prop_assert!(cap.value <= ha.min(hb) + 1e-7 * (1.0 + hb));
                prop_assert!(cap.lower <= cap.value + 1e-9);
                let exact = conic::support_polar_cap_socp(&p, t, r, &d).unwrap();
                prop_assert!((cap.value - exact).abs() <= 1e-8 * (1.0 + hb), "{} vs {}", cap.value, exact);
            }
        }
    }
}
