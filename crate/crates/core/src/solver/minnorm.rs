//! Wolfe's minimum-norm-point method for projecting onto a generator polytope.

use super::{GeneratorPolytope, ToleranceSpec};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};

/// Nearest point of a polytope to a target, with an active corral of generators.
#[derive(Clone, Debug)]
pub struct Projection {
    /// The nearest point `q*`.
    pub point: Vec<f64>,
    pub dist: f64,
    /// Signed generator indices with positive convex weights reproducing `point`.
    pub corral: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Projects `z` onto `P`; `warm` is a corral from a nearby earlier call.
pub fn project(p: &GeneratorPolytope, z: &[f64], warm: &[usize], tol: &ToleranceSpec) -> Result<Projection> {
    let scale = p.max_norm().max(norm(z)).max(1e-300);
    let gap_tol = 1e-14 * scale * scale;

    let mut corral: Vec<usize> = Vec::new();
    for &k in warm {
        if k < p.vertex_count() && !corral.contains(&k) && corral.len() <= p.dim() {
            corral.push(k);
        }
    }
    let mut weights: Vec<f64> = vec![1.0 / corral.len().max(1) as f64; corral.len()];
    if !corral.is_empty() && minor_cycle(p, z, &mut corral, &mut weights).is_err() {
        corral.clear();
    }
    if corral.is_empty() {
        corral.push(p.nearest_vertex(z));
        weights = vec![1.0];
    }

    let mut x = vec![0.0; p.dim()];
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..tol.max_iterations {
        combine(p, z, &corral, &weights, &mut x);
        let (j, xj) = p.lmo_min(&x);
        let xx = dot(&x, &x);
        if xx < best * (1.0 - 1e-15) {
            best = xx;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > 3 {
                return Ok(finish(p, z, corral, weights));
            }
        }
        // ⟨x, P_j − z⟩ = ⟨x, P_j⟩ − ⟨x, z⟩
        let gap = xx - (xj - dot(&x, z));
        if gap <= gap_tol || corral.contains(&j) {
            return Ok(finish(p, z, corral, weights));
        }
        corral.push(j);
        weights.push(0.0);
        if minor_cycle(p, z, &mut corral, &mut weights).is_err() {
            // The new vertex is numerically in the affine hull: no further progress is possible.
            corral.pop();
            weights.pop();
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            return Ok(finish(p, z, corral, weights));
        }
    }
    Err(Error::IterationLimit("min-norm point"))
}

fn finish(p: &GeneratorPolytope, z: &[f64], corral: Vec<usize>, weights: Vec<f64>) -> Projection {
    let mut point = vec![0.0; p.dim()];
    for (&k, &w) in corral.iter().zip(&weights) {
        p.add_vertex(&mut point, k, w);
    }
    let dist = crate::linalg::dist(&point, z);
    Projection { point, dist, corral, weights }
}

/// `x = Σ w_k (P_k − z)`
fn combine(p: &GeneratorPolytope, z: &[f64], corral: &[usize], weights: &[f64], x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = 0.0);
    for (&k, &w) in corral.iter().zip(weights) {
        p.add_vertex(x, k, w);
    }
    axpy(x, -1.0, z);
}

struct Singular;

fn minor_cycle(
    p: &GeneratorPolytope,
    z: &[f64],
    corral: &mut Vec<usize>,
    weights: &mut Vec<f64>,
) -> std::result::Result<(), Singular> {
    for _ in 0..=corral.len() + 1 {
        let beta = affine_minimizer(p, z, corral).ok_or(Singular)?;
        if beta.iter().all(|&b| b > 1e-15) {
            *weights = beta;
            return Ok(());
        }
        let mut theta = 1.0f64;
        for (w, b) in weights.iter().zip(&beta) {
            if *b <= 1e-15 && w > b {
                theta = theta.min(w / (w - b));
            }
        }
        for (w, b) in weights.iter_mut().zip(&beta) {
            *w = (1.0 - theta) * *w + theta * b;
        }
        let mut k = 0;
        while k < corral.len() {
            if weights[k] <= 1e-15 {
                corral.remove(k);
                weights.remove(k);
            } else {
                k += 1;
            }
        }
        if corral.is_empty() {
            return Err(Singular);
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
    }
    Err(Singular)
}

/// Affine weights of the point of minimal norm in `aff{P_k − z}`, by least squares
/// on the differences `P_k − P_0` with twice-orthogonalized Gram–Schmidt.
fn affine_minimizer(p: &GeneratorPolytope, z: &[f64], corral: &[usize]) -> Option<Vec<f64>> {
    let k = corral.len();
    if k == 1 {
        return Some(vec![1.0]);
    }
    let n = p.dim();
    let mut s0 = vec![0.0; n];
    p.add_vertex(&mut s0, corral[0], 1.0);
    let base = s0.clone();
    axpy(&mut s0, -1.0, z);

    let cols = k - 1;
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut r = vec![0.0; cols * cols];
    for j in 0..cols {
        let mut v = vec![0.0; n];
        p.add_vertex(&mut v, corral[j + 1], 1.0);
        axpy(&mut v, -1.0, &base);
        let len = norm(&v);
        for _pass in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = dot(qi, &v);
                r[i * cols + j] += c;
                axpy(&mut v, -c, qi);
            }
        }
        let d = norm(&v);
        if d <= 1e-11 * len.max(1e-300) {
            return None;
        }
        r[j * cols + j] = d;
        v.iter_mut().for_each(|x| *x /= d);
        q.push(v);
    }
    let mut mu: Vec<f64> = q.iter().map(|qi| -dot(qi, &s0)).collect();
    for i in (0..cols).rev() {
        let mut s = mu[i];
        for l in i + 1..cols {
            s -= r[i * cols + l] * mu[l];
        }
        mu[i] = s / r[i * cols + i];
    }
    let mut beta = Vec::with_capacity(k);
    beta.push(1.0 - mu.iter().sum::<f64>());
    beta.extend(mu);
    Some(beta)
}
