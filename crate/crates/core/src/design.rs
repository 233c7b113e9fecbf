//! Quasi-orthogonal designs: generation, verification and the projection tail
//! estimates behind them.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::rng::{gaussian_vec, unit_vector, StreamFactory, StreamId};
use crate::sampling::Estimate;
use ndarray::{s, Array2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    PaperFaithful,
    #[default]
    Desk,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    pub n: usize,
    pub m: usize,
    pub c_config: f64,
    pub seed: u64,
    pub mode: Mode,
}

impl DesignConfig {
    pub fn desk(n: usize, m: usize, seed: u64) -> Self {
        Self { n, m, c_config: 3.0, seed, mode: Mode::Desk }
    }

    pub fn delta(&self) -> f64 {
        delta(self.c_config, self.m)
    }

    /// Whether `C n ≤ m ≤ exp(n / C)` holds.
    pub fn in_range(&self) -> bool {
        let (n, m, c) = (self.n as f64, self.m as f64, self.c_config);
        c * n <= m && m.ln() <= n / c
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if self.m <= 1 {
            return Err(Error::InvalidConfig("m must be at least 2".into()));
        }
        if !(self.c_config > 0.0) || !self.c_config.is_finite() {
            return Err(Error::InvalidConfig("c_config must be positive".into()));
        }
        if self.mode == Mode::PaperFaithful && !self.in_range() {
            return Err(Error::InvalidConfig(format!(
                "paper-faithful mode requires {c} n <= m <= exp(n / {c}); got n = {}, m = {}",
                self.n,
                self.m,
                c = self.c_config
            )));
        }
        Ok(())
    }
}

/// `Δ = C √(ln m)`.
pub fn delta(c_config: f64, m: usize) -> f64 {
    c_config * (m as f64).ln().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiOrthogonalSystem {
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    pub vectors: Vec<Vec<f64>>,
}

impl QuasiOrthogonalSystem {
    /// Wraps explicit vectors; used for fixtures and hand-built systems.
    pub fn from_vectors(vectors: Vec<Vec<f64>>, delta: f64) -> Result<Self> {
        let n = vectors.first().map(|v| v.len()).unwrap_or(0);
        if n == 0 {
            return Err(Error::InvalidConfig("a system needs at least one nonempty vector".into()));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidConfig("delta must be positive".into()));
        }
        Ok(Self { n, m: vectors.len(), delta, seed: None, vectors })
    }

    /// The scale `√n / Δ` shared by both defining inequalities.
    pub fn unit(&self) -> f64 {
        (self.n as f64).sqrt() / self.delta
    }

    pub fn max_norm(&self) -> f64 {
        self.vectors.iter().map(|v| norm(v)).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(crate::json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sys: Self = serde_json::from_str(s)?;
        if sys.vectors.len() != sys.m || sys.vectors.iter().any(|v| v.len() != sys.n) {
            return Err(Error::InvalidConfig("vector list does not match n and m".into()));
        }
        Ok(sys)
    }
}

pub fn generate_design(config: &DesignConfig) -> Result<QuasiOrthogonalSystem> {
    config.validate()?;
    let delta = config.delta();
    let streams = StreamFactory::new(config.seed, "design");
    let vectors: Vec<Vec<f64>> = (0..config.m)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams.rng(i as u64);
            let mut g = gaussian_vec(&mut rng, config.n);
            g.iter_mut().for_each(|x| *x /= delta);
            g
        })
        .collect();
    Ok(QuasiOrthogonalSystem { n: config.n, m: config.m, delta, seed: Some(config.seed), vectors })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerProductViolation {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtremalValues {
    pub min_norm: f64,
    pub max_norm: f64,
    pub max_inner: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub norm_violations: Vec<usize>,
    pub inner_product_violations: Vec<InnerProductViolation>,
    pub passed: bool,
    /// Norms and the largest off-diagonal inner product, in units of `√n / Δ`.
    pub extremal_values: ExtremalValues,
}

const BLOCK: usize = 512;

/// Checks `½√n/Δ ≤ ‖x_i‖ ≤ 2√n/Δ` and `|⟨x_i, x_j⟩| ≤ √n/Δ` with exact f64 comparisons.
///
/// Inner products are screened with a single-precision Gram matrix and a
/// rounding bound; every pair the screen cannot settle is recomputed in f64.
pub fn verify_design(system: &QuasiOrthogonalSystem) -> DesignReport {
    let unit = system.unit();
    let norms: Vec<f64> = system.vectors.iter().map(|v| norm(v)).collect();
    let norm_violations: Vec<usize> = norms
        .iter()
        .enumerate()
        .filter(|(_, &r)| !(0.5 * unit <= r && r <= 2.0 * unit))
        .map(|(i, _)| i)
        .collect();
    let (min_norm, max_norm) =
        norms.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));

    let (mut violations, max_inner) = screen_inner_products(system, &norms, unit);
    violations.sort_by(|a, b| (a.i, a.j).cmp(&(b.i, b.j)));
    DesignReport {
        passed: norm_violations.is_empty() && violations.is_empty(),
        norm_violations,
        inner_product_violations: violations,
        extremal_values: ExtremalValues {
            min_norm: min_norm / unit,
            max_norm: max_norm / unit,
            max_inner: max_inner / unit,
        },
    }
}

fn screen_inner_products(
    system: &QuasiOrthogonalSystem,
    norms: &[f64],
    threshold: f64,
) -> (Vec<InnerProductViolation>, f64) {
    let (n, m) = (system.n, system.m);
    if m < 2 {
        return (Vec::new(), 0.0);
    }
    let x32 = Array2::from_shape_fn((m, n), |(i, k)| system.vectors[i][k] as f32);
    // Conversion plus accumulation error of a length-n f32 dot product, with room to spare.
    let rel = (n as f64 + 4.0) * f64::powi(2.0, -23);
    let max_norm = norms.iter().fold(0.0f64, |a, &b| a.max(b));
    // Any pair whose upper bound falls below `approx_max - err_max` cannot be the true maximum.
    let err_max = rel * max_norm * max_norm;
    let blocks: Vec<(usize, usize)> = (0..m)
        .step_by(BLOCK)
        .flat_map(|a| (a..m).step_by(BLOCK).map(move |b| (a, b)))
        .collect();

    struct BlockOut {
        violations: Vec<InnerProductViolation>,
        approx_max: f64,
        near_max: Vec<(usize, usize, f64)>,
    }

    let outs: Vec<BlockOut> = blocks
        .par_iter()
        .map(|&(a, b)| {
            let ea = (a + BLOCK).min(m);
            let eb = (b + BLOCK).min(m);
            let g = x32.slice(s![a..ea, ..]).dot(&x32.slice(s![b..eb, ..]).t());
            let mut out = BlockOut { violations: Vec::new(), approx_max: 0.0, near_max: Vec::new() };
            for i in a..ea {
                let j0 = if a == b { i + 1 } else { b };
                let row = g.row(i - a);
                let ri = rel * norms[i];
                for j in j0..eb {
                    let v = (row[j - b] as f64).abs();
                    let upper = v + ri * norms[j];
                    if upper >= threshold {
                        let exact = dot(&system.vectors[i], &system.vectors[j]);
                        if exact.abs() > threshold {
                            out.violations.push(InnerProductViolation { i, j, value: exact });
                        }
                    }
                    if v > out.approx_max {
                        out.approx_max = v;
                    }
                    // Only entries that could still be the maximum are kept.
                    if upper >= out.approx_max - err_max {
                        out.near_max.push((i, j, upper));
                        if out.near_max.len() > 4096 {
                            let cut = out.approx_max - err_max;
                            out.near_max.retain(|e| e.2 >= cut);
                        }
                    }
                }
            }
            let cut = out.approx_max - err_max;
            out.near_max.retain(|e| e.2 >= cut);
            out
        })
        .collect();

    let approx_max = outs.iter().map(|o| o.approx_max).fold(0.0, f64::max);
    let mut max_inner = 0.0f64;
    let mut violations = Vec::new();
    for o in outs {
        violations.extend(o.violations);
        for (i, j, upper) in o.near_max {
            if upper >= approx_max - err_max {
                max_inner = max_inner.max(dot(&system.vectors[i], &system.vectors[j]).abs());
            }
        }
    }
    (violations, max_inner)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    Gaussian,
    Sphere,
    Ball,
}

/// Draws `trials` samples of `max_i |⟨v_i, X⟩|`; trial `k` always uses stream index `k`.
pub fn max_projections(
    kind: TailKind,
    directions: &[Vec<f64>],
    trials: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = match directions.first() {
        Some(d) => d.len(),
        None => return Ok(vec![0.0; trials]),
    };
    for (index, d) in directions.iter().enumerate() {
        if d.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: d.len() });
        }
        let r = norm(d);
        if (r - 1.0).abs() > 1e-9 {
            return Err(Error::NonUnitDirection { index, norm: r });
        }
    }
    let streams = StreamFactory::new(seed, tail_label(kind));
    let radius = (n as f64).sqrt();
    Ok((0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = streams.rng(k as u64);
            let x = match kind {
                TailKind::Gaussian => gaussian_vec(&mut rng, n),
                TailKind::Sphere => unit_vector(&mut rng, n).into_iter().map(|v| v * radius).collect(),
                TailKind::Ball => {
                    let mut u = unit_vector(&mut rng, n);
                    let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
                    u.iter_mut().for_each(|v| *v *= r);
                    u
                }
            };
            directions.iter().map(|d| dot(d, &x).abs()).fold(0.0, f64::max)
        })
        .collect())
}

fn tail_label(kind: TailKind) -> &'static str {
    match kind {
        TailKind::Gaussian => "tail/gaussian",
        TailKind::Sphere => "tail/sphere",
        TailKind::Ball => "tail/ball",
    }
}

/// Fraction of cached samples at or above `threshold`, with binomial standard error.
pub fn tail_from_sample(sample: &[f64], threshold: f64, stream: StreamId) -> Estimate {
    let n = sample.len().max(1);
    let hits = sample.iter().filter(|&&v| v >= threshold).count();
    Estimate::from_hits(hits, n, stream)
}

pub fn tail_probability(
    kind: TailKind,
    directions: &[Vec<f64>],
    threshold: f64,
    trials: usize,
    seed: u64,
) -> Result<Estimate> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be positive".into()));
    }
    let sample = max_projections(kind, directions, trials, seed)?;
    Ok(tail_from_sample(&sample, threshold, StreamId::new(seed, tail_label(kind))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_report(sys: &QuasiOrthogonalSystem) -> (Vec<usize>, Vec<(usize, usize)>, f64) {
        let unit = sys.unit();
        let nv = (0..sys.m)
            .filter(|&i| {
                let r = norm(&sys.vectors[i]);
                !(0.5 * unit <= r && r <= 2.0 * unit)
            })
            .collect();
        let mut iv = Vec::new();
        let mut mx = 0.0f64;
        for i in 0..sys.m {
            for j in i + 1..sys.m {
                let v = dot(&sys.vectors[i], &sys.vectors[j]).abs();
                mx = mx.max(v);
                if v > unit {
                    iv.push((i, j));
                }
            }
        }
        (nv, iv, mx / unit)
    }

    #[test]
    fn generation_is_deterministic() {
        let c = DesignConfig::desk(2, 2, 11);
        assert_eq!(generate_design(&c).unwrap(), generate_design(&c).unwrap());
        let d = generate_design(&DesignConfig::desk(2, 2, 12)).unwrap();
        assert_ne!(generate_design(&c).unwrap().vectors, d.vectors);
    }

    #[test]
    fn rejects_degenerate_configs() {
        assert!(generate_design(&DesignConfig::desk(3, 1, 0)).is_err());
        assert!(generate_design(&DesignConfig::desk(0, 5, 0)).is_err());
        let pf = DesignConfig { n: 10, m: 20, c_config: 3.0, seed: 0, mode: Mode::PaperFaithful };
        assert!(generate_design(&pf).is_err());
    }

    #[test]
    fn orthogonal_pair_passes() {
        let (n, delta) = (100usize, 2.0);
        let u = (n as f64).sqrt() / delta;
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        a[0] = u;
        b[1] = u;
        let sys = QuasiOrthogonalSystem::from_vectors(vec![a.clone(), b], delta).unwrap();
        assert!(verify_design(&sys).passed);

        let dup = QuasiOrthogonalSystem::from_vectors(vec![a.clone(), a.clone()], delta).unwrap();
        let r = verify_design(&dup);
        assert!(!r.passed);
        assert_eq!(r.inner_product_violations.len(), 1);
        assert_eq!(r.inner_product_violations[0].value, u * u);

        let long = QuasiOrthogonalSystem::from_vectors(vec![a.iter().map(|x| 3.0 * x).collect()], delta)
            .unwrap();
        assert_eq!(verify_design(&long).norm_violations, vec![0]);
    }

    #[test]
    fn screened_report_matches_naive() {
        for seed in 0..4 {
            // c_config 1 makes violations common so both branches are exercised.
            let cfg = DesignConfig { n: 24, m: 700, c_config: 1.0, seed, mode: Mode::Desk };
            let sys = generate_design(&cfg).unwrap();
            let r = verify_design(&sys);
            let (nv, iv, mx) = naive_report(&sys);
            assert_eq!(r.norm_violations, nv);
            let got: Vec<(usize, usize)> = r.inner_product_violations.iter().map(|v| (v.i, v.j)).collect();
            assert_eq!(got, iv);
            assert_eq!(r.extremal_values.max_inner, mx);
        }
    }

    #[test]
    fn tail_zero_threshold_is_certain() {
        let est = tail_probability(TailKind::Gaussian, &[vec![1.0]], 0.0, 1000, 3).unwrap();
        assert_eq!(est.value, 1.0);
        assert!(tail_probability(TailKind::Gaussian, &[vec![2.0]], 0.0, 10, 3).is_err());
    }

    #[test]
    fn tail_matches_normal_two_sided() {
        let est = tail_probability(TailKind::Gaussian, &[vec![0.6, 0.8]], 1.96, 100_000, 5).unwrap();
        assert!((est.value - 0.049_995_790_2).abs() <= 3.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn tail_is_monotone_in_threshold() {
        let dirs = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
        let sample = max_projections(TailKind::Ball, &dirs, 2000, 9).unwrap();
        let mut prev = 1.0;
        for k in 0..30 {
            let p = tail_from_sample(&sample, k as f64 * 0.1, StreamId::new(9, "t")).value;
            assert!(p <= prev);
            prev = p;
        }
    }
}
