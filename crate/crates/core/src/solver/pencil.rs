//! Gauges and chords of two-level hulls `conv(top·e₀ + P, bottom·e₀ + ρB)`.
//!
//! Membership of a lifted point reduces to a single scalar condition
//! `dist(y_⊥, αP) ≤ ρβ`; along a pencil of heights or along a line the
//! left-hand side minus the right is convex, so Newton steps taken from the
//! outside converge monotonically.

use super::{project, GeneratorPolytope, ToleranceSpec};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// `dist(p, αP)` with the data needed for derivatives.
#[derive(Clone, Debug)]
pub struct ScaledDistance {
    pub dist: f64,
    /// `q* ∈ P` with `αq*` the nearest point.
    pub anchor: Vec<f64>,
    /// Unit residual `(p − αq*)/dist`, zero when `dist = 0`.
    pub residual: Vec<f64>,
    /// `⟨residual, q*⟩ = −∂dist/∂α`.
    pub slope: f64,
}

pub fn scaled_distance(
    p: &GeneratorPolytope,
    y: &[f64],
    alpha: f64,
    warm: &mut Vec<usize>,
    tol: &ToleranceSpec,
) -> Result<ScaledDistance> {
    let ny = norm(y);
    if alpha <= 1e-300 {
        if ny == 0.0 {
            return Ok(ScaledDistance { dist: 0.0, anchor: vec![0.0; y.len()], residual: vec![0.0; y.len()], slope: 0.0 });
        }
        let (k, h) = p.lmo_max(y);
        let residual: Vec<f64> = y.iter().map(|v| v / ny).collect();
        return Ok(ScaledDistance { dist: ny, anchor: p.vertex(k), residual, slope: h / ny });
    }
    let z: Vec<f64> = y.iter().map(|v| v / alpha).collect();
    let proj = project(p, &z, warm, tol)?;
    *warm = proj.corral;
    let dist = alpha * proj.dist;
    if dist <= 1e-15 * (ny + alpha * p.max_norm()) {
        return Ok(ScaledDistance { dist, anchor: proj.point, residual: vec![0.0; y.len()], slope: 0.0 });
    }
    let residual: Vec<f64> = y.iter().zip(&proj.point).map(|(a, q)| (a - alpha * q) / dist).collect();
    let slope = dot(&residual, &proj.point);
    Ok(ScaledDistance { dist, anchor: proj.point, residual, slope })
}

/// Root of a convex function approached from the side where it is positive.
///
/// `f` returns value and derivative. `outside` must satisfy `f > 0` and
/// `inside` must satisfy `f ≤ 0`; the result lies between them.
pub fn newton_from_outside(
    f: &mut dyn FnMut(f64) -> Result<(f64, f64)>,
    mut outside: f64,
    mut f_out: (f64, f64),
    mut inside: f64,
    xtol: f64,
    ftol: f64,
    max_iter: usize,
) -> Result<f64> {
    for _ in 0..max_iter {
        if (outside - inside).abs() <= xtol {
            return Ok(outside);
        }
        let (fv, dv) = f_out;
        let mut x = outside - fv / dv;
        let between = if outside > inside { x < outside && x > inside } else { x > outside && x < inside };
        if !between || !x.is_finite() {
            x = 0.5 * (outside + inside);
        }
        let val = f(x)?;
        if val.0 <= 0.0 {
            if val.0 >= -ftol {
                return Ok(x);
            }
            inside = x;
        } else {
            if val.0 <= ftol {
                return Ok(x);
            }
            outside = x;
            f_out = val;
        }
    }
    Err(Error::IterationLimit("convex root"))
}

/// Affine pencil `α(τ) = a0 + a1 τ`, `β(τ) = b0 + b1 τ` with bottom radius `ρβ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pencil {
    pub a0: f64,
    pub a1: f64,
    pub b0: f64,
    pub b1: f64,
    pub rho: f64,
}

impl Pencil {
    /// Pencil of the gauge about `center·e₀` of `conv(top·e₀ + P, bottom·e₀ + ρB)` at height `y0`.
    pub fn two_level(top: f64, bottom: f64, rho: f64, center: f64, y0: f64) -> Self {
        let h = top - bottom;
        Self {
            a0: (y0 - center) / h,
            a1: (center - bottom) / h,
            b0: -(y0 - center) / h,
            b1: (top - center) / h,
            rho,
        }
    }
}

/// Smallest `τ ≥ 0` with `α(τ), β(τ) ≥ 0` and `dist(y, α(τ)P) ≤ ρβ(τ)`; `+∞` if none.
pub fn pencil_gauge(p: &GeneratorPolytope, y: &[f64], pen: Pencil, tol: &ToleranceSpec) -> Result<f64> {
    if !(pen.b1 > 0.0) || pen.a1 < 0.0 || !(pen.rho > 0.0) {
        return Err(Error::InvalidConfig("pencil needs b1 > 0, a1 ≥ 0 and ρ > 0".into()));
    }
    let mut lo = 0.0f64.max(-pen.b0 / pen.b1);
    if pen.a1 > 0.0 {
        lo = lo.max(-pen.a0 / pen.a1);
    } else if pen.a0 < 0.0 {
        return Ok(f64::INFINITY);
    }
    let ny = norm(y);
    let mut warm = Vec::new();
    let mut f = |tau: f64| -> Result<(f64, f64)> {
        let alpha = (pen.a0 + pen.a1 * tau).max(0.0);
        let beta = (pen.b0 + pen.b1 * tau).max(0.0);
        let sd = scaled_distance(p, y, alpha, &mut warm, tol)?;
        Ok((sd.dist - pen.rho * beta, -pen.a1 * sd.slope - pen.rho * pen.b1))
    };
    let f_lo = f(lo)?;
    if f_lo.0 <= 0.0 {
        return Ok(lo);
    }
    let hi = lo.max((ny / pen.rho - pen.b0) / pen.b1);
    let ftol = 1e-13 * (1.0 + ny);
    newton_from_outside(&mut f, lo, f_lo, hi, tol.bisection_tol * 1e-3 * hi.max(1e-300), ftol, tol.max_iterations)
}

/// `conv(top·e₀ + P, bottom·e₀ + ρB)` with `top > bottom`, viewed in `ℝ^{1+n}`.
#[derive(Clone, Copy, Debug)]
pub struct TwoLevel<'a> {
    pub p: &'a GeneratorPolytope,
    pub top: f64,
    pub bottom: f64,
    pub rho: f64,
}

impl TwoLevel<'_> {
    pub fn radius_bound(&self) -> f64 {
        self.top.hypot(self.p.max_norm()).max(self.bottom.hypot(self.rho))
    }

    /// The convex membership function `dist(y_⊥, αP) − ρ(1 − α)` at height `y0`
    /// (heights are clamped to the slab).
    fn excess(
        &self,
        y0: f64,
        yp: &[f64],
        u0: f64,
        up: &[f64],
        warm: &mut Vec<usize>,
        tol: &ToleranceSpec,
    ) -> Result<(f64, f64)> {
        let h = self.top - self.bottom;
        let alpha = ((y0 - self.bottom) / h).clamp(0.0, 1.0);
        let sd = scaled_distance(self.p, yp, alpha, warm, tol)?;
        let val = sd.dist - self.rho * (1.0 - alpha);
        let deriv = dot(&sd.residual, up) + (u0 / h) * (self.rho - sd.slope);
        Ok((val, deriv))
    }

    /// Largest `s ≥ 0` with `y + s·u` in the body, for `y` inside.
    pub fn exit_distance(&self, y0: f64, yp: &[f64], u0: f64, up: &[f64], tol: &ToleranceSpec) -> Result<f64> {
        let s_slab = if u0 > 0.0 {
            (self.top - y0) / u0
        } else if u0 < 0.0 {
            (self.bottom - y0) / u0
        } else {
            f64::INFINITY
        };
        let ynorm = y0.hypot(norm(yp));
        let unorm = u0.hypot(norm(up));
        let s_far = (ynorm + self.radius_bound()) / unorm * 1.01;
        let s_out = s_slab.min(s_far).max(0.0);
        let mut warm = Vec::new();
        let mut buf = yp.to_vec();
        let mut g = |s: f64| -> Result<(f64, f64)> {
            for (b, (a, d)) in buf.iter_mut().zip(yp.iter().zip(up)) {
                *b = a + s * d;
            }
            self.excess(y0 + s * u0, &buf, u0, up, &mut warm, tol)
        };
        let g_out = g(s_out)?;
        if g_out.0 <= 0.0 {
            return Ok(s_out);
        }
        let ftol = 1e-13 * (1.0 + self.radius_bound());
        newton_from_outside(&mut g, s_out, g_out, 0.0, 1e-14 * s_out.max(1e-300), ftol, tol.max_iterations)
    }

    /// Whether `(y0, y_⊥)` lies in the body, as the signed excess (≤ 0 inside).
    pub fn excess_at(&self, y0: f64, yp: &[f64], tol: &ToleranceSpec) -> Result<f64> {
        if y0 > self.top || y0 < self.bottom {
            return Ok(f64::INFINITY);
        }
        let mut warm = Vec::new();
        Ok(self.excess(y0, yp, 0.0, &vec![0.0; yp.len()], &mut warm, tol)?.0)
    }
}
