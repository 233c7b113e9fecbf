//! Fixed-shape linear and second-order cone programs, solved with an
//! interior-point method. These back the general (non-hot) paths and serve as
//! an independent route for cross-checking the specialized solvers.

use super::{GeneratorPolytope, ToleranceSpec};
use crate::error::{Error, Result};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
    SupportedConeT::{NonnegativeConeT, SecondOrderConeT, ZeroConeT},
};

struct Triplets {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    nrows: usize,
}

impl Triplets {
    fn new() -> Self {
        Self { rows: Vec::new(), cols: Vec::new(), vals: Vec::new(), nrows: 0 }
    }

    /// Starts a new constraint row and returns its index.
    fn row(&mut self) -> usize {
        self.nrows += 1;
        self.nrows - 1
    }

    fn push(&mut self, r: usize, c: usize, v: f64) {
        if v != 0.0 {
            self.rows.push(r);
            self.cols.push(c);
            self.vals.push(v);
        }
    }

    fn matrix(self, ncols: usize) -> CscMatrix<f64> {
        CscMatrix::new_from_triplets(self.nrows, ncols, self.rows, self.cols, self.vals)
    }
}

enum Outcome {
    Solved(Vec<f64>),
    Infeasible,
    Unbounded,
}

fn solve(q: Vec<f64>, a: Triplets, b: Vec<f64>, cones: &[SupportedConeT<f64>]) -> Result<Outcome> {
    let ncols = q.len();
    debug_assert_eq!(a.nrows, b.len());
    let a = a.matrix(ncols);
    let p = CscMatrix::zeros((ncols, ncols));
    let settings = DefaultSettings {
        verbose: false,
        tol_gap_abs: 1e-11,
        tol_gap_rel: 1e-11,
        tol_feas: 1e-11,
        max_iter: 400,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, &q, &a, &b, cones, settings)
        .map_err(|e| Error::Solver(format!("{e:?}")))?;
    solver.solve();
    match solver.solution.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => Ok(Outcome::Solved(solver.solution.x.clone())),
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Ok(Outcome::Infeasible),
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Ok(Outcome::Unbounded),
        other => Err(Error::Solver(format!("{other:?}"))),
    }
}

/// Gauge of a generator polytope as the program
/// `min Σλ  s.t.  Σ λ_k P_k = y, λ ≥ 0`.
pub fn gauge_polytope_lp(p: &GeneratorPolytope, y: &[f64], _tol: &ToleranceSpec) -> Result<f64> {
    let n = p.dim();
    let k = p.vertex_count();
    let mut a = Triplets::new();
    let mut b = Vec::new();
    for r in 0..n {
        let row = a.row();
        for c in 0..k {
            let (i, s) = p.signed(c);
            a.push(row, c, s * p.generator(i)[r]);
        }
        b.push(y[r]);
    }
    for c in 0..k {
        let row = a.row();
        a.push(row, c, -1.0);
        b.push(0.0);
    }
    match solve(vec![1.0; k], a, b, &[ZeroConeT(n), NonnegativeConeT(k)])? {
        Outcome::Solved(x) => Ok(x.iter().map(|v| v.max(0.0)).sum()),
        Outcome::Infeasible => Ok(f64::INFINITY),
        Outcome::Unbounded => Err(Error::Solver("gauge program unbounded".into())),
    }
}

/// `h_{P°}(d) = max ⟨z, d⟩ s.t. ⟨P_k, z⟩ ≤ 1`; `+∞` when the polar is unbounded in `d`.
pub fn support_of_polar(p: &GeneratorPolytope, d: &[f64]) -> Result<f64> {
    let n = p.dim();
    let mut a = Triplets::new();
    let mut b = Vec::new();
    for k in 0..p.vertex_count() {
        let row = a.row();
        let (i, s) = p.signed(k);
        for c in 0..n {
            a.push(row, c, s * p.generator(i)[c]);
        }
        b.push(1.0);
    }
    let q: Vec<f64> = d.iter().map(|v| -v).collect();
    let rows = a.nrows;
    match solve(q, a, b, &[NonnegativeConeT(rows)])? {
        Outcome::Solved(z) => Ok(crate::linalg::dot(&z, d)),
        Outcome::Unbounded => Ok(f64::INFINITY),
        Outcome::Infeasible => Err(Error::Solver("polar program infeasible".into())),
    }
}

/// `h_{tP° ∩ rB}(d)` solved directly as a second-order cone program.
pub fn support_polar_cap_socp(p: &GeneratorPolytope, t: f64, radius: f64, d: &[f64]) -> Result<f64> {
    let n = p.dim();
    let mut a = Triplets::new();
    let mut b = Vec::new();
    for k in 0..p.vertex_count() {
        let row = a.row();
        let (i, s) = p.signed(k);
        for c in 0..n {
            a.push(row, c, s * p.generator(i)[c]);
        }
        b.push(t);
    }
    let lin = a.nrows;
    a.row();
    b.push(radius);
    for c in 0..n {
        let row = a.row();
        a.push(row, c, -1.0);
        b.push(0.0);
    }
    let q: Vec<f64> = d.iter().map(|v| -v).collect();
    match solve(q, a, b, &[NonnegativeConeT(lin), SecondOrderConeT(n + 1)])? {
        Outcome::Solved(z) => Ok(crate::linalg::dot(&z, d)),
        _ => Err(Error::Solver("cap program failed".into())),
    }
}

/// Gauge about `center·e₀` of `conv(top·e₀ + Q, bottom·e₀ + ρ(Q° ∩ B))`, where
/// only the generators listed in `long` can cut the ball.
///
/// Variables `[α, β, c⁺, c⁻, v]`: the point splits as `α`-scaled top face plus
/// `β`-scaled bottom face, with `y_⊥ = X(c⁺ − c⁻) + v`.
#[allow(clippy::too_many_arguments)]
pub fn two_level_gauge_socp(
    q: &GeneratorPolytope,
    long: &[usize],
    top: f64,
    bottom: f64,
    rho: f64,
    center: f64,
    y0: f64,
    yp: &[f64],
) -> Result<f64> {
    let n = q.dim();
    let m = q.len();
    let ncols = 2 + 2 * m + n;
    let (ia, ib, icp, icm, iv) = (0, 1, 2, 2 + m, 2 + 2 * m);
    let mut a = Triplets::new();
    let mut b = Vec::new();
    for r in 0..n {
        let row = a.row();
        for i in 0..m {
            let g = q.generator(i)[r];
            a.push(row, icp + i, g);
            a.push(row, icm + i, -g);
        }
        a.push(row, iv + r, 1.0);
        b.push(yp[r]);
    }
    let row = a.row();
    a.push(row, ia, top - center);
    a.push(row, ib, bottom - center);
    b.push(y0 - center);
    let zeros = a.nrows;

    for c in 0..2 + 2 * m {
        let row = a.row();
        a.push(row, c, -1.0);
        b.push(0.0);
    }
    let row = a.row();
    a.push(row, ia, -1.0);
    for i in 0..2 * m {
        a.push(row, icp + i, 1.0);
    }
    b.push(0.0);
    for &i in long {
        for s in [1.0, -1.0] {
            let row = a.row();
            for c in 0..n {
                a.push(row, iv + c, s * q.generator(i)[c]);
            }
            a.push(row, ib, -rho);
            b.push(0.0);
        }
    }
    let nonneg = a.nrows - zeros;
    let row = a.row();
    a.push(row, ib, -rho);
    b.push(0.0);
    for c in 0..n {
        let row = a.row();
        a.push(row, iv + c, -1.0);
        b.push(0.0);
    }
    let mut obj = vec![0.0; ncols];
    obj[ia] = 1.0;
    obj[ib] = 1.0;
    match solve(obj, a, b, &[ZeroConeT(zeros), NonnegativeConeT(nonneg), SecondOrderConeT(n + 1)])? {
        Outcome::Solved(x) => Ok(x[ia].max(0.0) + x[ib].max(0.0)),
        Outcome::Infeasible => Ok(f64::INFINITY),
        Outcome::Unbounded => Err(Error::Solver("two-level gauge program unbounded".into())),
    }
}

/// Largest `ε` such that `center = Σ λ_k w_k` with `Σλ = 1` and every `λ_k ≥ ε`.
/// Negative or missing when `center` is outside the hull.
pub fn interior_margin(vertices: &[Vec<f64>], center: &[f64]) -> Result<f64> {
    let n = center.len();
    let k = vertices.len();
    // Variables [λ (k), ε]
    let mut a = Triplets::new();
    let mut b = Vec::new();
    for r in 0..n {
        let row = a.row();
        for (c, w) in vertices.iter().enumerate() {
            a.push(row, c, w[r]);
        }
        b.push(center[r]);
    }
    let row = a.row();
    for c in 0..k {
        a.push(row, c, 1.0);
    }
    b.push(1.0);
    for c in 0..k {
        let row = a.row();
        a.push(row, c, -1.0);
        a.push(row, k, 1.0);
        b.push(0.0);
    }
    // Keep ε bounded so the program never reports unboundedness.
    let row = a.row();
    a.push(row, k, 1.0);
    b.push(1.0);
    let mut obj = vec![0.0; k + 1];
    obj[k] = -1.0;
    match solve(obj, a, b, &[ZeroConeT(n + 1), NonnegativeConeT(k + 1)])? {
        Outcome::Solved(x) => Ok(x[k]),
        Outcome::Infeasible => Ok(f64::NEG_INFINITY),
        Outcome::Unbounded => Err(Error::Solver("interior program unbounded".into())),
    }
}

/// `max ⟨d, x⟩ s.t. A x ≤ b`; returns the value and a maximizer.
pub fn h_polytope_support(a_rows: &[Vec<f64>], b_vals: &[f64], d: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = d.len();
    let mut a = Triplets::new();
    for r in a_rows {
        let row = a.row();
        for c in 0..n {
            a.push(row, c, r[c]);
        }
    }
    let q: Vec<f64> = d.iter().map(|v| -v).collect();
    let rows = a.nrows;
    match solve(q, a, b_vals.to_vec(), &[NonnegativeConeT(rows)])? {
        Outcome::Solved(x) => Ok((crate::linalg::dot(&x, d), x)),
        Outcome::Unbounded => Ok((f64::INFINITY, vec![f64::NAN; n])),
        Outcome::Infeasible => Err(Error::Solver("empty polytope".into())),
    }
}

/// Split of `w⊥ = Σ_k λ_k P_k + v` with `λ ≥ 0`, `Σλ = α`, minimizing
/// `s = max(‖v‖, max_{i∈long} |⟨x_i, v⟩|)`, the `Q₁°` gauge of the remainder.
///
/// Returns the signed-vertex weights `λ` (length `2m`), `v` and `s`.
pub fn split_two_level(
    q: &GeneratorPolytope,
    long: &[usize],
    alpha: f64,
    w_perp: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n = q.dim();
    let k = q.vertex_count();
    // columns: λ (k), v (n), s
    let (cv, cs) = (k, k + n);
    let mut a = Triplets::new();
    let mut b = Vec::new();
    let row = a.row();
    for c in 0..k {
        a.push(row, c, 1.0);
    }
    b.push(alpha);
    for r in 0..n {
        let row = a.row();
        for c in 0..k {
            let (i, sg) = q.signed(c);
            a.push(row, c, sg * q.generator(i)[r]);
        }
        a.push(row, cv + r, 1.0);
        b.push(w_perp[r]);
    }
    for c in 0..k {
        let row = a.row();
        a.push(row, c, -1.0);
        b.push(0.0);
    }
    for &i in long {
        for sg in [1.0, -1.0] {
            let row = a.row();
            a.push(row, cs, -1.0);
            for r in 0..n {
                a.push(row, cv + r, sg * q.generator(i)[r]);
            }
            b.push(0.0);
        }
    }
    let row = a.row();
    a.push(row, cs, -1.0);
    b.push(0.0);
    for r in 0..n {
        let row = a.row();
        a.push(row, cv + r, -1.0);
        b.push(0.0);
    }
    let mut c = vec![0.0; k + n + 1];
    c[cs] = 1.0;
    let cones = [ZeroConeT(1 + n), NonnegativeConeT(k + 2 * long.len()), SecondOrderConeT(n + 1)];
    match solve(c, a, b, &cones)? {
        Outcome::Solved(x) => {
            let lambda: Vec<f64> = x[..k].iter().map(|v| v.max(0.0)).collect();
            let mut v = w_perp.to_vec();
            for (c, &l) in lambda.iter().enumerate() {
                q.add_vertex(&mut v, c, -l);
            }
            let s = crate::linalg::norm(&v)
                .max(long.iter().map(|&i| crate::linalg::dot(q.generator(i), &v).abs()).fold(0.0, f64::max));
            Ok((lambda, v, s))
        }
        _ => Err(Error::Solver("split program failed".into())),
    }
}
