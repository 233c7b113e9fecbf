//! Test vectors, the separation identities, vertex decompositions in `K(η, κ)`,
//! the covering certificate and sandwich verification.

use crate::bodies::{BodyOracle, HardBodyParams, LiftedHull, LiftedPoint};
use crate::design::QuasiOrthogonalSystem;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::rng::{unit_vector, StreamFactory};
use crate::solver::{classify, conic, project, GeneratorPolytope, Membership, ToleranceSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

/// Absolute slack for the closed threshold comparisons.
pub const THRESHOLD_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestVectorPair {
    pub i: usize,
    pub sigma: i8,
    /// `(1 − η)e₀ + σx_i`
    pub plus: LiftedPoint,
    /// `−(2√n/Δ)e₀ + σx_i`
    pub minus: LiftedPoint,
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.5 {
        return Err(Error::EtaTooLarge(eta));
    }
    if !(eta >= 0.0) {
        return Err(Error::InvalidConfig(format!("eta must be nonnegative, got {eta}")));
    }
    Ok(())
}

fn check_sigma(sigma: i8) -> Result<f64> {
    match sigma {
        1 => Ok(1.0),
        -1 => Ok(-1.0),
        _ => Err(Error::InvalidConfig(format!("sigma must be ±1, got {sigma}"))),
    }
}

pub fn test_vectors(system: &QuasiOrthogonalSystem, eta: f64, i: usize, sigma: i8) -> Result<TestVectorPair> {
    check_eta(eta)?;
    let s = check_sigma(sigma)?;
    let x = system
        .vectors
        .get(i)
        .ok_or_else(|| Error::InvalidConfig(format!("index {i} out of range for m = {}", system.m)))?;
    let perp: Vec<f64> = x.iter().map(|v| s * v).collect();
    Ok(TestVectorPair {
        i,
        sigma,
        plus: LiftedPoint::new(1.0 - eta, perp.clone()),
        minus: LiftedPoint::new(-2.0 * system.unit(), perp),
    })
}

/// `x⁻_{i,+1}` as a flat lifted vector.
pub fn minus_vector(system: &QuasiOrthogonalSystem, i: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(system.n + 1);
    v.push(-2.0 * system.unit());
    v.extend_from_slice(&system.vectors[i]);
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub eta: f64,
    pub pairs_checked: usize,
    /// Largest relative deviation of a direct inner product from its closed form.
    pub identity_max_rel_error: f64,
    pub identities_hold: bool,
    pub off_diagonal_max: f64,
    pub off_diagonal_violations: usize,
    pub diagonal_min: f64,
    pub diagonal_max: f64,
    /// `n / (8Δ²)`
    pub diagonal_lower_bound: f64,
    /// `4n / Δ²`
    pub diagonal_upper_bound: f64,
    pub diagonal_lower_failures: usize,
    pub diagonal_upper_failures: usize,
    /// The lower bound is only claimed when `2Δ/√n ≤ 1/8`.
    pub diagonal_lower_applicable: bool,
}

pub const IDENTITY_REL_TOL: f64 = 1e-9;

/// Checks `⟨x⁺_{i,σ}, x⁻_{j,τ}⟩ = −2(1 − η)√n/Δ + στ⟨x_i, x_j⟩` on every pair,
/// then the diagonal-dominance and off-diagonal sign inequalities.
pub fn separation_report(system: &QuasiOrthogonalSystem, eta: f64) -> Result<SeparationReport> {
    check_eta(eta)?;
    let m = system.m;
    let unit = system.unit();
    let base = -2.0 * (1.0 - eta) * unit;
    let norms: Vec<f64> = system.vectors.iter().map(|v| norm(v)).collect();
    struct Row {
        err: f64,
        off_max: f64,
        off_viol: usize,
        diag: Vec<f64>,
    }
    let rows: Vec<Row> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut r = Row { err: 0.0, off_max: f64::NEG_INFINITY, off_viol: 0, diag: Vec::new() };
            for si in [1i8, -1] {
                let p = test_vectors(system, eta, i, si).expect("checked eta");
                for j in 0..m {
                    let g = dot(&system.vectors[i], &system.vectors[j]);
                    for sj in [1i8, -1] {
                        let q = test_vectors(system, eta, j, sj).expect("checked eta");
                        let direct = p.plus.dot(&q.minus);
                        let formula = base + (si * sj) as f64 * g;
                        let scale = 2.0 * (1.0 - eta) * unit + norms[i] * norms[j];
                        r.err = r.err.max((direct - formula).abs() / scale.max(f64::MIN_POSITIVE));
                        if i == j && si == sj {
                            r.diag.push(direct);
                        } else {
                            r.off_max = r.off_max.max(direct);
                            if direct > 0.0 {
                                r.off_viol += 1;
                            }
                        }
                    }
                }
            }
            r
        })
        .collect();
    let n = system.n as f64;
    let d2 = system.delta * system.delta;
    let lower = n / (8.0 * d2);
    let upper = 4.0 * n / d2;
    let diag: Vec<f64> = rows.iter().flat_map(|r| r.diag.iter().copied()).collect();
    let err = rows.iter().map(|r| r.err).fold(0.0, f64::max);
    Ok(SeparationReport {
        eta,
        pairs_checked: 4 * m * m,
        identity_max_rel_error: err,
        identities_hold: err <= IDENTITY_REL_TOL,
        off_diagonal_max: rows.iter().map(|r| r.off_max).fold(f64::NEG_INFINITY, f64::max),
        off_diagonal_violations: rows.iter().map(|r| r.off_viol).sum(),
        diagonal_min: diag.iter().copied().fold(f64::INFINITY, f64::min),
        diagonal_max: diag.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        diagonal_lower_bound: lower,
        diagonal_upper_bound: upper,
        diagonal_lower_failures: diag.iter().filter(|&&v| v < lower).count(),
        diagonal_upper_failures: diag.iter().filter(|&&v| v > upper).count(),
        diagonal_lower_applicable: 2.0 * system.delta / n.sqrt() <= 0.125,
    })
}

/// A finite vertex list `{w_α}` in the lifted space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidatePolytope {
    pub vertices: Vec<LiftedPoint>,
    pub label: String,
}

impl CandidatePolytope {
    /// Drops vertices within `1e-12` (max-coordinate) of an earlier one.
    pub fn new(vertices: Vec<LiftedPoint>, label: impl Into<String>) -> Result<Self> {
        let mut kept: Vec<LiftedPoint> = Vec::with_capacity(vertices.len());
        for v in vertices {
            let dup = kept.iter().any(|k| {
                k.y_perp.len() == v.y_perp.len()
                    && (k.y0 - v.y0).abs() <= 1e-12
                    && k.y_perp.iter().zip(&v.y_perp).all(|(a, b)| (a - b).abs() <= 1e-12)
            });
            if !dup {
                kept.push(v);
            }
        }
        if kept.is_empty() {
            return Err(Error::InvalidConfig("a candidate polytope needs at least one vertex".into()));
        }
        let d = kept[0].y_perp.len();
        if let Some(v) = kept.iter().find(|v| v.y_perp.len() != d) {
            return Err(Error::DimensionMismatch { expected: d + 1, got: v.y_perp.len() + 1 });
        }
        Ok(Self { vertices: kept, label: label.into() })
    }

    pub fn from_points(points: &[Vec<f64>], label: impl Into<String>) -> Result<Self> {
        Self::new(points.iter().map(|p| LiftedPoint::from_slice(p)).collect(), label)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Ambient dimension `n + 1`.
    pub fn dim(&self) -> usize {
        self.vertices[0].y_perp.len() + 1
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.vertices.iter().map(|v| v.to_vec()).collect()
    }

    /// `max_α ⟨w_α, d⟩`
    pub fn support(&self, d: &[f64]) -> f64 {
        self.vertices.iter().map(|v| v.y0 * d[0] + dot(&v.y_perp, &d[1..])).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One decomposition `w = Σ λ_{i,σ} x⁺_{i,σ} + λ_B (bottom·e₀ + ρ y)` with `y ∈ Q₁°`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// `λ_{i,+1}`
    pub lambda_plus: Vec<f64>,
    /// `λ_{i,−1}`
    pub lambda_minus: Vec<f64>,
    pub lambda_b: f64,
    /// The bottom point `y ∈ Q₁°`.
    pub witness: Vec<f64>,
    /// `‖reconstruction − w‖`
    pub residual: f64,
}

impl Decomposition {
    pub fn total(&self) -> f64 {
        self.lambda_plus.iter().sum::<f64>() + self.lambda_minus.iter().sum::<f64>() + self.lambda_b
    }

    pub fn reconstruct(&self, hull: &LiftedHull) -> Vec<f64> {
        let n = hull.n();
        let mut out = vec![0.0; n + 1];
        let top_weight: f64 = self.lambda_plus.iter().sum::<f64>() + self.lambda_minus.iter().sum::<f64>();
        out[0] = top_weight * hull.top + self.lambda_b * hull.bottom;
        for i in 0..hull.q.len() {
            let c = self.lambda_plus[i] - self.lambda_minus[i];
            if c != 0.0 {
                crate::linalg::axpy(&mut out[1..], c, hull.q.generator(i));
            }
        }
        crate::linalg::axpy(&mut out[1..], self.lambda_b * hull.rho, &self.witness);
        out
    }
}

/// Splits `w ∈ K(η, κ)` into top-vertex weights and a bottom point.
pub fn decompose_vertex(w: &LiftedPoint, hull: &LiftedHull, tol: f64) -> Result<Decomposition> {
    let n = hull.n();
    let m = hull.q.len();
    if w.y_perp.len() != n {
        return Err(Error::DimensionMismatch { expected: n + 1, got: w.y_perp.len() + 1 });
    }
    let span = hull.top - hull.bottom;
    let alpha = (w.y0 - hull.bottom) / span;
    if alpha < -tol || alpha > 1.0 + tol {
        return Err(Error::NotInBody);
    }
    let alpha = alpha.clamp(0.0, 1.0);
    let mut signed = vec![0.0; 2 * m];
    let remainder: Vec<f64>;
    if alpha == 0.0 {
        remainder = w.y_perp.clone();
    } else if hull.ball_bottom() {
        let z: Vec<f64> = w.y_perp.iter().map(|v| v / alpha).collect();
        let proj = project(&hull.q, &z, &[], &ToleranceSpec::default())?;
        for (k, wt) in proj.corral.iter().zip(&proj.weights) {
            signed[*k] += alpha * wt.max(0.0);
        }
        remainder = w.y_perp.iter().zip(&proj.point).map(|(a, q)| a - alpha * q).collect();
    } else {
        let (lambda, v, _) = conic::split_two_level(&hull.q, &hull.long, alpha, &w.y_perp)?;
        signed = lambda;
        remainder = v;
    }
    let lambda_b = 1.0 - alpha;
    let cap = hull.rho * lambda_b;
    let witness: Vec<f64> = if cap > 0.0 { remainder.iter().map(|v| v / cap).collect() } else { vec![0.0; n] };
    // the witness must lie in Q₁° and the remainder must vanish at the top
    let wit_gauge = norm(&witness).max(
        hull.long.iter().map(|&i| dot(hull.q.generator(i), &witness).abs()).fold(0.0, f64::max),
    );
    let rem = norm(&remainder);
    if (cap > 0.0 && wit_gauge > 1.0 + tol / cap.max(tol)) || (cap == 0.0 && rem > tol) {
        return Err(Error::NotInBody);
    }
    let witness = if wit_gauge > 1.0 { witness.iter().map(|v| v / wit_gauge).collect() } else { witness };
    let mut d = Decomposition {
        lambda_plus: signed[..m].to_vec(),
        lambda_minus: signed[m..].to_vec(),
        lambda_b,
        witness,
        residual: 0.0,
    };
    let back = d.reconstruct(hull);
    d.residual = crate::linalg::dist(&back, &w.to_vec());
    if d.residual > tol.max(1e-9) * (1.0 + norm(&w.to_vec())) {
        return Err(Error::NotInBody);
    }
    Ok(d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Conclusion {
    LowerBoundHolds,
    SandwichViolated,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringCertificate {
    /// `12·max{κ, 1}`
    pub threshold: f64,
    /// `α ↦ S_α`, listing only vertices that cover something.
    pub covering_sets: BTreeMap<usize, Vec<usize>>,
    pub uncovered: Vec<usize>,
    /// `4n / (9Δ²)`
    pub per_vertex_bound: f64,
    /// `9Δ²m / (4n)`
    pub implied_lower_bound: f64,
    /// `max_α |S_α|`
    pub max_cover: usize,
    /// `⌈m / max_α |S_α|⌉` when every index is covered.
    pub counting_lower_bound: Option<usize>,
    pub conclusion: Conclusion,
}

/// `S_α = {i : ⟨w_α, x⁻_{i,+1}⟩ ≥ 12·max{κ, 1}}` and the resulting conclusion.
///
/// `claims_sandwich` is the caller's assertion that `P ⊆ K ⊆ R·P`; uncovered
/// indices then contradict it.
pub fn covering_certificate(
    p: &CandidatePolytope,
    system: &QuasiOrthogonalSystem,
    kappa: f64,
    claims_sandwich: bool,
) -> Result<CoveringCertificate> {
    if p.dim() != system.n + 1 {
        return Err(Error::DimensionMismatch { expected: system.n + 1, got: p.dim() });
    }
    let threshold = 12.0 * kappa.max(1.0);
    let minus: Vec<LiftedPoint> = (0..system.m).map(|i| LiftedPoint::from_slice(&minus_vector(system, i))).collect();
    let sets: Vec<Vec<usize>> = p
        .vertices
        .par_iter()
        .map(|w| (0..system.m).filter(|&i| w.dot(&minus[i]) >= threshold - THRESHOLD_TOL).collect())
        .collect();
    let mut covered = vec![false; system.m];
    let mut covering_sets = BTreeMap::new();
    for (a, s) in sets.into_iter().enumerate() {
        for &i in &s {
            covered[i] = true;
        }
        if !s.is_empty() {
            covering_sets.insert(a, s);
        }
    }
    let uncovered: Vec<usize> = (0..system.m).filter(|&i| !covered[i]).collect();
    let max_cover = covering_sets.values().map(|s| s.len()).max().unwrap_or(0);
    let counting_lower_bound = if uncovered.is_empty() && max_cover > 0 { Some(system.m.div_ceil(max_cover)) } else { None };
    let conclusion = if uncovered.is_empty() {
        Conclusion::LowerBoundHolds
    } else if claims_sandwich {
        Conclusion::SandwichViolated
    } else {
        Conclusion::Inconclusive
    };
    let n = system.n as f64;
    let d2 = system.delta * system.delta;
    Ok(CoveringCertificate {
        threshold,
        covering_sets,
        uncovered,
        per_vertex_bound: 4.0 * n / (9.0 * d2),
        implied_lower_bound: 9.0 * d2 * system.m as f64 / (4.0 * n),
        max_cover,
        counting_lower_bound,
        conclusion,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub r: f64,
    /// The hypothesis needs `R > 1`; smaller values are still checked.
    pub r_at_most_one: bool,
    pub inner_ok: bool,
    /// Vertices of `P` outside the body.
    pub inner_failures: Vec<usize>,
    /// Indices `i` with `R·max_α⟨w_α, x⁻_{i,+1}⟩ < ⟨x⁺_{i,+1}, x⁻_{i,+1}⟩`.
    pub test_direction_failures: Vec<usize>,
    pub random_directions: usize,
    pub random_direction_failures: usize,
    /// Necessary conditions for `K ⊆ R·P` only; never a proof of inclusion.
    pub outer_necessary_passed: bool,
}

/// Checks `P ⊆ K(η, κ)` exactly on vertices and the necessary conditions for `K ⊆ R·P`.
pub fn verify_sandwich(
    p: &CandidatePolytope,
    params: &HardBodyParams,
    body: &LiftedHull,
    r: f64,
    n_directions: usize,
    seed: u64,
    tol: f64,
) -> Result<SandwichReport> {
    let system = &params.system;
    if p.dim() != system.n + 1 {
        return Err(Error::DimensionMismatch { expected: system.n + 1, got: p.dim() });
    }
    if r <= 1.0 {
        log::warn!("sandwich factor R = {r} is at most 1; reporting the checks anyway");
    }
    let inner: Vec<Result<bool>> = p
        .vertices
        .par_iter()
        .map(|w| Ok(body.membership(&w.to_vec(), tol)? != Membership::Outside))
        .collect();
    let mut inner_failures = Vec::new();
    for (a, ok) in inner.into_iter().enumerate() {
        if !ok? {
            inner_failures.push(a);
        }
    }
    let test_direction_failures: Vec<usize> = (0..system.m)
        .into_par_iter()
        .filter_map(|i| {
            let pair = test_vectors(system, params.eta.max(0.0).min(0.5), i, 1).ok()?;
            let lhs = r * p.support(&pair.minus.to_vec());
            (lhs < pair.plus.dot(&pair.minus) - THRESHOLD_TOL).then_some(i)
        })
        .collect();
    let factory = StreamFactory::new(seed, "sandwich-directions");
    let dim = system.n + 1;
    let random: Vec<Result<bool>> = (0..n_directions)
        .into_par_iter()
        .map(|k| {
            let d = unit_vector(&mut factory.rng(k as u64), dim);
            let hk = body.support(&d)?.value;
            Ok(hk > r * p.support(&d) + tol)
        })
        .collect();
    let mut random_direction_failures = 0;
    for f in random {
        random_direction_failures += f? as usize;
    }
    Ok(SandwichReport {
        r,
        r_at_most_one: r <= 1.0,
        inner_ok: inner_failures.is_empty(),
        inner_failures,
        outer_necessary_passed: test_direction_failures.is_empty() && random_direction_failures == 0,
        test_direction_failures,
        random_directions: n_directions,
        random_direction_failures,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaperConstants {
    pub n: usize,
    pub m: usize,
    pub kappa: f64,
    pub delta: f64,
    /// `n / (96Δ² max{κ, 1})`
    pub r: f64,
    /// `12·max{κ, 1}`
    pub threshold: f64,
    /// `4n / (9Δ²)`
    pub per_vertex: f64,
    /// `9Δ²m / (4n)`
    pub lower: f64,
    pub lower_ceil: u64,
    pub m_over_n: f64,
    /// `9Δ² / (4n)`, the least top weight of a covering vertex.
    pub lambda_min: f64,
}

pub fn paper_constants(n: usize, m: usize, kappa: f64, c_config: f64) -> Result<PaperConstants> {
    if !(c_config > 0.0) || m < 2 {
        return Err(Error::InvalidConfig("c_config must be positive and m at least 2".into()));
    }
    paper_constants_with_delta(n, m, kappa, crate::design::delta(c_config, m))
}

pub fn paper_constants_with_delta(n: usize, m: usize, kappa: f64, delta: f64) -> Result<PaperConstants> {
    if n == 0 || m == 0 || !(kappa > 0.0) || !(delta > 0.0) {
        return Err(Error::InvalidConfig("paper constants need positive inputs".into()));
    }
    let k = kappa.max(1.0);
    let nf = n as f64;
    let d2 = delta * delta;
    let lower = 9.0 * d2 * m as f64 / (4.0 * nf);
    Ok(PaperConstants {
        n,
        m,
        kappa,
        delta,
        r: nf / (96.0 * d2 * k),
        threshold: 12.0 * k,
        per_vertex: 4.0 * nf / (9.0 * d2),
        lower,
        lower_ceil: (lower - 1e-12).ceil() as u64,
        m_over_n: m as f64 / nf,
        lambda_min: 9.0 * d2 / (4.0 * nf),
    })
}

/// `K(η, κ)` over a fresh copy of the system's generators, skipping re-verification.
pub fn hull_for(params: &HardBodyParams) -> Result<LiftedHull> {
    params.validate()?;
    let q = Arc::new(GeneratorPolytope::new(params.system.vectors.clone(), true)?);
    LiftedHull::from_polytope(q, params.system.unit(), params.eta, params.kappa)
}

/// Band classification of a lifted point against `K(η, κ)`.
pub fn classify_in(hull: &LiftedHull, w: &LiftedPoint, tol: f64) -> Result<Membership> {
    Ok(classify(hull.level(&w.to_vec())?, tol))
}
