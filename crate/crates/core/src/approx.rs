//! Baseline approximating polytopes and the sandwich-ratio estimator.

use crate::bodies::{boundary_along, BodyOracle, LiftedPoint};
use crate::error::{Error, Result};
use crate::hardness::CandidatePolytope;
use crate::linalg::{dot, norm, scaled};
use crate::rng::{gaussian_vec, unit_vector, StreamFactory};
use crate::sampling::{hit_and_run_chains, ChainConfig};
use crate::solver::conic::interior_margin;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Smallest convex-combination weight for a center to count as interior.
pub const CENTER_MARGIN: f64 = 1e-10;

/// Ties within this excess go to the earliest direction.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    /// Attained by an explicit direction, so `K − c ⊄ λ(P − c)` for any smaller `λ`.
    pub lambda_lower: f64,
    /// After local ascent from the best sampled directions; never below `lambda_lower`.
    pub lambda_estimate: f64,
    pub directions_used: usize,
}

fn check_count(body: &dyn BodyOracle, n_vertices: usize) -> Result<()> {
    let n = body.dim();
    if n_vertices < n + 2 {
        return Err(Error::InvalidConfig(format!(
            "an approximating polytope in dimension {n} needs at least {} vertices, got {n_vertices}",
            n + 2
        )));
    }
    Ok(())
}

/// Convex hull of `n_vertices` hit-and-run samples, taken chain-major from `n_chains` chains.
pub fn random_vertex_polytope(
    body: &dyn BodyOracle,
    n_vertices: usize,
    chain: &ChainConfig,
    n_chains: usize,
    seed: u64,
) -> Result<CandidatePolytope> {
    check_count(body, n_vertices)?;
    if n_chains == 0 {
        return Err(Error::InvalidConfig("need at least one chain".into()));
    }
    let per_chain = n_vertices.div_ceil(n_chains);
    let chains = hit_and_run_chains(body, chain, n_chains, per_chain, seed)?;
    let points: Vec<Vec<f64>> = chains.into_iter().flatten().take(n_vertices).collect();
    CandidatePolytope::from_points(&points, format!("random:N={n_vertices}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    pub n_vertices: usize,
    /// Random directions scored at every step, on top of the body's test directions.
    pub direction_budget: usize,
    /// Passes of single-vertex exchanges after the greedy phase.
    pub exchange_rounds: usize,
}

impl GreedyConfig {
    pub fn new(n_vertices: usize, direction_budget: usize) -> Self {
        Self { n_vertices, direction_budget, exchange_rounds: 4 }
    }
}

/// Body point used for direction `d`: a support point when the oracle has one,
/// else the boundary point from the interior point along `d`.
fn body_point(body: &dyn BodyOracle, center: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    if let Some(p) = body.support_point(d)? {
        return Ok(p);
    }
    let s = boundary_along(body, center, d)?;
    Ok(center.iter().zip(d).map(|(c, u)| c + s * u).collect())
}

struct Scores {
    dirs: Vec<Vec<f64>>,
    body: Vec<f64>,
}

impl Scores {
    fn new(body: &dyn BodyOracle, budget: usize, seed: u64, label: &str) -> Result<Self> {
        let n = body.dim();
        let factory = StreamFactory::new(seed, label);
        let mut dirs: Vec<Vec<f64>> = body.test_directions().into_iter().map(|d| scaled(&d, 1.0 / norm(&d))).collect();
        dirs.extend((0..budget).map(|k| unit_vector(&mut factory.rng(k as u64), n)));
        let flat: Vec<f64> = dirs.iter().flatten().copied().collect();
        let body_h = body.support_batch(&flat, dirs.len())?.into_iter().map(|s| s.value).collect();
        Ok(Self { dirs, body: body_h })
    }

    fn projections(&self, v: &[f64]) -> Vec<f64> {
        self.dirs.par_iter().map(|d| dot(d, v)).collect()
    }

    /// `h_P` on every direction from per-vertex projections, skipping vertex `skip`.
    fn hull_support(&self, proj: &[Vec<f64>], skip: Option<usize>) -> Vec<f64> {
        let mut h = vec![f64::NEG_INFINITY; self.dirs.len()];
        for (a, p) in proj.iter().enumerate() {
            if Some(a) == skip {
                continue;
            }
            for (hk, pk) in h.iter_mut().zip(p) {
                *hk = hk.max(*pk);
            }
        }
        h
    }

    /// First index of the maximal excess `h_K − h_P`, with ties within [`TIE_TOL`].
    fn worst(&self, hull: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (k, (b, p)) in self.body.iter().zip(hull).enumerate() {
            let e = b - p;
            if e > best.1 + TIE_TOL {
                best = (k, e);
            }
        }
        best
    }

    fn mean_excess(&self, hull: &[f64]) -> f64 {
        self.body.iter().zip(hull).map(|(b, p)| b - p).sum::<f64>() / hull.len() as f64
    }
}

/// Greedy inscribed polytope: a random simplex around the interior point, then
/// repeatedly the body point in the direction where `h_K − h_P` is largest.
///
/// The exchange phase removes one vertex at a time and re-adds the greedy point,
/// keeping the swap when the largest excess does not grow, the mean excess drops
/// and the interior point stays strictly inside.
pub fn greedy_polytope(body: &dyn BodyOracle, config: &GreedyConfig, seed: u64) -> Result<CandidatePolytope> {
    check_count(body, config.n_vertices)?;
    let n = body.dim();
    let center = body.interior_point();
    let scores = Scores::new(body, config.direction_budget, seed, "greedy-directions")?;
    if scores.dirs.is_empty() {
        return Err(Error::InvalidConfig("greedy needs a positive direction budget".into()));
    }

    // Directions summing to zero keep the interior point inside the simplex.
    let mut rng = StreamFactory::new(seed, "greedy-simplex").rng(0);
    let mut simplex: Vec<Vec<f64>> = (0..n).map(|_| gaussian_vec(&mut rng, n)).collect();
    let mut last = vec![0.0; n];
    for u in &simplex {
        for (l, v) in last.iter_mut().zip(u) {
            *l -= v;
        }
    }
    simplex.push(last);
    let mut vertices = Vec::with_capacity(config.n_vertices);
    for u in &simplex {
        let u = scaled(u, 1.0 / norm(u));
        let s = boundary_along(body, &center, &u)?;
        vertices.push(center.iter().zip(&u).map(|(c, x)| c + s * x).collect::<Vec<f64>>());
    }
    let mut proj: Vec<Vec<f64>> = vertices.iter().map(|v| scores.projections(v)).collect();
    let mut hull = scores.hull_support(&proj, None);

    while vertices.len() < config.n_vertices {
        let (k, _) = scores.worst(&hull);
        let v = body_point(body, &center, &scores.dirs[k])?;
        let p = scores.projections(&v);
        for (h, x) in hull.iter_mut().zip(&p) {
            *h = h.max(*x);
        }
        vertices.push(v);
        proj.push(p);
    }

    for round in 0..config.exchange_rounds {
        let mut changed = false;
        for a in 0..vertices.len() {
            let without = scores.hull_support(&proj, Some(a));
            let (k, _) = scores.worst(&without);
            let v = body_point(body, &center, &scores.dirs[k])?;
            let p = scores.projections(&v);
            let trial: Vec<f64> = without.iter().zip(&p).map(|(h, x)| h.max(*x)).collect();
            let (_, old_max) = scores.worst(&hull);
            let (_, new_max) = scores.worst(&trial);
            if new_max <= old_max + TIE_TOL && scores.mean_excess(&trial) < scores.mean_excess(&hull) - TIE_TOL {
                let old = std::mem::replace(&mut vertices[a], v);
                // the interior point must stay strictly inside for later ratio measurements
                if !(interior_margin(&vertices, &center)? > CENTER_MARGIN) {
                    vertices[a] = old;
                    continue;
                }
                proj[a] = p;
                hull = trial;
                changed = true;
            }
        }
        log::debug!("greedy exchange round {round}: max excess {:.3e}", scores.worst(&hull).1);
        if !changed {
            break;
        }
    }
    CandidatePolytope::from_points(&vertices, format!("greedy:N={}", config.n_vertices))
}

/// `h_{K−c}(d) / h_{P−c}(d)`
fn ratio(body_h: f64, p: &CandidatePolytope, c: &[f64], d: &[f64]) -> f64 {
    let cd = dot(c, d);
    (body_h - cd) / (p.support(d) - cd)
}

/// Sandwich factor of `P ⊆ K` about a shared center, as a maximum of support ratios.
///
/// The body's test directions are always included, followed by `n_directions`
/// random ones on stream `(seed, "sandwich-ratio", k)`.
pub fn sandwich_ratio(
    p: &CandidatePolytope,
    body: &dyn BodyOracle,
    center: &LiftedPoint,
    n_directions: usize,
    seed: u64,
) -> Result<RatioEstimate> {
    let c = center.to_vec();
    if p.dim() != body.dim() || c.len() != body.dim() {
        return Err(Error::DimensionMismatch { expected: body.dim(), got: p.dim().min(c.len()) });
    }
    if !(interior_margin(&p.points(), &c)? > CENTER_MARGIN) {
        return Err(Error::CenterNotInterior);
    }
    let scores = Scores::new(body, n_directions, seed, "sandwich-ratio")?;
    let ratios: Vec<f64> =
        scores.dirs.par_iter().zip(&scores.body).map(|(d, &h)| ratio(h, p, &c, d)).collect();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| ratios[b].total_cmp(&ratios[a]).then(a.cmp(&b)));
    let lambda_lower = order.first().map_or(f64::NEG_INFINITY, |&k| ratios[k]);

    // Random-perturbation ascent on the sphere from the four best directions.
    let factory = StreamFactory::new(seed, "sandwich-refine");
    let refined: Vec<Result<f64>> = order
        .iter()
        .take(4)
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(s, &k)| {
            let mut rng = factory.rng(s as u64);
            let mut d = scores.dirs[k].clone();
            let mut best = ratios[k];
            let mut step = 0.1;
            for _ in 0..200 {
                let g = gaussian_vec(&mut rng, d.len());
                let trial: Vec<f64> = d.iter().zip(&g).map(|(x, y)| x + step * y).collect();
                let trial = scaled(&trial, 1.0 / norm(&trial));
                let r = ratio(body.support(&trial)?.value, p, &c, &trial);
                if r > best {
                    best = r;
                    d = trial;
                } else {
                    step *= 0.9;
                }
                if step < 1e-6 {
                    break;
                }
            }
            Ok(best)
        })
        .collect();
    let mut lambda_estimate = lambda_lower;
    for r in refined {
        lambda_estimate = lambda_estimate.max(r?);
    }
    Ok(RatioEstimate { lambda_lower, lambda_estimate, directions_used: scores.dirs.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::{Ball, VPolytope};
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn origin(n: usize) -> LiftedPoint {
        LiftedPoint::from_slice(&vec![0.0; n])
    }

    #[test]
    fn random_disk_polytope_is_close() {
        let disk = Ball::unit(2);
        let p = random_vertex_polytope(&disk, 10_000, &ChainConfig::for_dim(2), 4, 1).unwrap();
        assert_eq!(p.len(), 10_000);
        let r = sandwich_ratio(&p, &disk, &origin(2), 2000, 1).unwrap();
        assert!(r.lambda_lower <= 1.2, "{r:?}");
        assert!(r.lambda_lower <= r.lambda_estimate);
        let again = random_vertex_polytope(&disk, 10_000, &ChainConfig::for_dim(2), 4, 1).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn too_few_vertices() {
        let disk = Ball::unit(2);
        assert!(random_vertex_polytope(&disk, 3, &ChainConfig::for_dim(2), 1, 1).is_err());
        assert!(greedy_polytope(&disk, &GreedyConfig::new(3, 100), 1).is_err());
        assert!(greedy_polytope(&disk, &GreedyConfig::new(4, 100), 1).is_ok());
    }

    #[test]
    fn greedy_disk_sixteen_gon() {
        let disk = Ball::unit(2);
        let p = greedy_polytope(&disk, &GreedyConfig::new(16, 4000), 3).unwrap();
        assert_eq!(p.len(), 16);
        for v in p.points() {
            assert!((disk.gauge(&v).unwrap() - 1.0).abs() < 1e-9);
        }
        let r = sandwich_ratio(&p, &disk, &origin(2), 4000, 3).unwrap();
        let bound = 1.0 / (std::f64::consts::PI / 16.0).cos() + 0.01;
        assert!(r.lambda_estimate <= bound, "{r:?}");
    }

    #[test]
    fn greedy_beats_random_on_disk() {
        let disk = Ball::unit(2);
        let mut wins = 0;
        for seed in 0..10 {
            let g = greedy_polytope(&disk, &GreedyConfig::new(16, 1000), seed).unwrap();
            let r = random_vertex_polytope(&disk, 16, &ChainConfig::for_dim(2), 2, seed).unwrap();
            let lg = sandwich_ratio(&g, &disk, &origin(2), 1000, seed).unwrap().lambda_lower;
            let lr = match sandwich_ratio(&r, &disk, &origin(2), 1000, seed) {
                Ok(e) => e.lambda_lower,
                Err(Error::CenterNotInterior) => f64::INFINITY,
                Err(e) => panic!("{e}"),
            };
            wins += (lg <= lr) as usize;
        }
        assert_eq!(wins, 10);
    }

    #[test]
    fn half_body_has_ratio_two() {
        let sq = vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, -1.0], vec![0.0, 1.5]];
        let body = VPolytope::new(sq.clone()).unwrap();
        let half: Vec<Vec<f64>> = sq.iter().map(|v| scaled(v, 0.5)).collect();
        let p = CandidatePolytope::from_points(&half, "half").unwrap();
        let r = sandwich_ratio(&p, &body, &origin(2), 500, 2).unwrap();
        assert!((r.lambda_lower - 2.0).abs() < 1e-12 && (r.lambda_estimate - 2.0).abs() < 1e-12, "{r:?}");
        let same = CandidatePolytope::from_points(&sq, "same").unwrap();
        let r = sandwich_ratio(&same, &body, &origin(2), 500, 2).unwrap();
        assert!((r.lambda_estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn center_outside_is_rejected() {
        let disk = Ball::unit(2);
        let p = CandidatePolytope::from_points(&[vec![0.5, 0.0], vec![0.9, 0.1], vec![0.9, -0.1]], "off").unwrap();
        assert!(matches!(sandwich_ratio(&p, &disk, &origin(2), 10, 0), Err(Error::CenterNotInterior)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn lower_bound_grows_with_budget(seed in 0u64..1000, k in 10usize..200) {
            let disk = Ball::unit(2);
            let p = greedy_polytope(&disk, &GreedyConfig { n_vertices: 6, direction_budget: 50, exchange_rounds: 0 }, seed).unwrap();
            let a = sandwich_ratio(&p, &disk, &origin(2), k, seed).unwrap();
            let b = sandwich_ratio(&p, &disk, &origin(2), 2 * k, seed).unwrap();
            prop_assert!(a.lambda_lower <= b.lambda_lower);
        }

        #[test]
        fn nested_polytopes_order_ratios(seed in 0u64..1000) {
            let disk = Ball::unit(2);
            let small = greedy_polytope(&disk, &GreedyConfig { n_vertices: 5, direction_budget: 64, exchange_rounds: 0 }, seed).unwrap();
            let mut pts = small.points();
            pts.extend(greedy_polytope(&disk, &GreedyConfig::new(8, 64), seed + 1).unwrap().points());
            let big = CandidatePolytope::from_points(&pts, "union").unwrap();
            let a = sandwich_ratio(&small, &disk, &origin(2), 300, seed).unwrap();
            let b = sandwich_ratio(&big, &disk, &origin(2), 300, seed).unwrap();
            prop_assert!(b.lambda_lower <= a.lambda_lower + 1e-12);
        }
    }
}
