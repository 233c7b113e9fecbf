//! Reproducible Monte-Carlo estimators and the hit-and-run sampler.
//!
//! Sample `i` of an estimator draws from stream `(seed, label, i)`, so values do
//! not depend on the number of workers, and estimators sharing a label use
//! common random numbers.

use crate::bodies::{Ball, BodyOracle, Cuboid};
use crate::design::QuasiOrthogonalSystem;
use crate::error::{Error, Result};
use crate::linalg::{mean_stderr, norm, pairwise_sum};
use crate::rng::{gaussian_vec, uniform_in_ball, unit_vector, StreamFactory, StreamId};
use crate::solver::GeneratorPolytope;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Rows per batched support call.
const BLOCK: usize = 256;

pub const GAUSSIAN_LABEL: &str = "gaussian";
pub const BALL_LABEL: &str = "ball";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    #[serde(flatten)]
    pub stream: StreamId,
    /// Some support values entering the mean were certified upper bounds only.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub upper_bound_only: bool,
}

impl Estimate {
    pub fn from_samples(xs: &[f64], stream: StreamId) -> Self {
        let (value, stderr) = mean_stderr(xs);
        Self { value, stderr, n_samples: xs.len(), stream, upper_bound_only: false }
    }

    /// Mean of 0/1 outcomes with the binomial standard error.
    pub fn from_hits(hits: usize, n: usize, stream: StreamId) -> Self {
        let p = hits as f64 / n as f64;
        Self { value: p, stderr: (p * (1.0 - p) / n as f64).sqrt(), n_samples: n, stream, upper_bound_only: false }
    }

    /// Number of standard errors separating the estimate from `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = self.value - target;
        if self.stderr == 0.0 {
            if d == 0.0 { 0.0 } else { f64::INFINITY * d.signum() }
        } else {
            d / self.stderr
        }
    }

    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr
    }
}

fn check_samples(n_samples: usize) -> Result<()> {
    if n_samples == 0 {
        return Err(Error::InvalidConfig("at least one sample is required".into()));
    }
    Ok(())
}

/// Draws rows `start..start+rows` of a shared sample stream into a flat block.
fn draw_block<F>(factory: &StreamFactory, start: usize, rows: usize, n: usize, draw: F) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng, usize) -> Vec<f64>,
{
    let mut out = Vec::with_capacity(rows * n);
    for i in start..start + rows {
        out.extend(draw(&mut factory.rng(i as u64), n));
    }
    out
}

fn block_starts(n_samples: usize) -> Vec<(usize, usize)> {
    (0..n_samples).step_by(BLOCK).map(|s| (s, BLOCK.min(n_samples - s))).collect()
}

/// Per-sample support values `h(G_i)` and Gaussian norms `‖G_i‖`.
fn gaussian_supports(oracle: &dyn BodyOracle, n_samples: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>, bool)> {
    let n = oracle.dim();
    let factory = StreamFactory::new(seed, GAUSSIAN_LABEL);
    let blocks: Vec<Result<(Vec<f64>, Vec<f64>, bool)>> = block_starts(n_samples)
        .into_par_iter()
        .map(|(start, rows)| {
            let g = draw_block(&factory, start, rows, n, |r, n| gaussian_vec(r, n));
            let hs = oracle.support_batch(&g, rows)?;
            let flag = hs.iter().any(|h| h.upper_bound_only);
            let norms = (0..rows).map(|r| norm(&g[r * n..(r + 1) * n])).collect();
            Ok((hs.into_iter().map(|h| h.value).collect(), norms, flag))
        })
        .collect();
    let mut h = Vec::with_capacity(n_samples);
    let mut g = Vec::with_capacity(n_samples);
    let mut flag = false;
    for b in blocks {
        let (a, b, f) = b?;
        h.extend(a);
        g.extend(b);
        flag |= f;
    }
    Ok((h, g, flag))
}

/// Gaussian mean width `E h_L(G)`.
pub fn mean_width(oracle: &dyn BodyOracle, n_samples: usize, seed: u64) -> Result<Estimate> {
    check_samples(n_samples)?;
    let (h, _, flag) = gaussian_supports(oracle, n_samples, seed)?;
    if flag {
        log::warn!("mean width used support values that are upper bounds only");
    }
    let mut e = Estimate::from_samples(&h, StreamId::new(seed, GAUSSIAN_LABEL));
    e.upper_bound_only = flag;
    Ok(e)
}

/// `E‖G‖` for a standard Gaussian in dimension `n`.
pub fn gaussian_norm_mean(n: usize) -> f64 {
    let n = n as f64;
    // √2 Γ((n+1)/2) / Γ(n/2), through log-gamma to avoid overflow
    std::f64::consts::SQRT_2 * (ln_gamma(0.5 * (n + 1.0)) - ln_gamma(0.5 * n)).exp()
}

/// Lanczos approximation (g = 7, 9 terms), accurate to about 1e-15 relative.
fn ln_gamma(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `|Q_t°| / |B|`, the fraction of uniform points `Y ∈ B` with `max_i |⟨x_i, Y⟩| ≤ t`.
pub fn volume_ratio_qt_polar(system: &QuasiOrthogonalSystem, t: f64, n_samples: usize, seed: u64) -> Result<Estimate> {
    volume_ratio_polar_cap(&system.vectors, system.n, t, n_samples, seed)
}

/// As [`volume_ratio_qt_polar`] for an explicit generator list, which may be empty.
pub fn volume_ratio_polar_cap(
    vectors: &[Vec<f64>],
    n: usize,
    t: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveT(t));
    }
    check_samples(n_samples)?;
    let stream = StreamId::new(seed, BALL_LABEL);
    if vectors.is_empty() {
        return Ok(Estimate::from_hits(n_samples, n_samples, stream));
    }
    let p = GeneratorPolytope::new(vectors.to_vec(), true)?;
    let factory = stream.factory();
    let hits: usize = block_starts(n_samples)
        .into_par_iter()
        .map(|(start, rows)| {
            let y = draw_block(&factory, start, rows, n, |r, n| uniform_in_ball(r, n, 1.0));
            p.support_batch(&y, rows).into_iter().filter(|h| *h <= t).count()
        })
        .sum();
    Ok(Estimate::from_hits(hits, n_samples, stream))
}

/// Urysohn's bound `(w_G(L) / w_G(B))ⁿ` on `|L| / |B|`, from common random numbers.
pub fn urysohn_bound(oracle: &dyn BodyOracle, n_samples: usize, seed: u64) -> Result<Estimate> {
    check_samples(n_samples)?;
    let n = oracle.dim();
    let (h, g, flag) = gaussian_supports(oracle, n_samples, seed)?;
    let mh = pairwise_sum(&h) / n_samples as f64;
    let mg = pairwise_sum(&g) / n_samples as f64;
    let ratio = mh / mg;
    // delta method for a ratio of means: Var(h − ratio·g) / (N · mg²)
    let resid: Vec<f64> = h.iter().zip(&g).map(|(a, b)| a - ratio * b).collect();
    let (_, se_resid) = mean_stderr(&resid);
    let se_ratio = se_resid / mg;
    let value = ratio.powi(n as i32);
    let stderr = n as f64 * ratio.powi(n as i32 - 1) * se_ratio;
    Ok(Estimate {
        value,
        stderr,
        n_samples,
        stream: StreamId::new(seed, GAUSSIAN_LABEL),
        upper_bound_only: flag,
    })
}

/// Reference bodies with closed-form volume and direct uniform sampling.
pub trait VolumeReference: BodyOracle {
    fn volume(&self) -> f64;
    fn sample_uniform(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
}

impl VolumeReference for Ball {
    fn volume(&self) -> f64 {
        Ball::volume(self)
    }

    fn sample_uniform(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut y = uniform_in_ball(rng, self.center.len(), self.radius);
        y.iter_mut().zip(&self.center).for_each(|(v, c)| *v += c);
        y
    }
}

impl VolumeReference for Cuboid {
    fn volume(&self) -> f64 {
        Cuboid::volume(self)
    }

    fn sample_uniform(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect()
    }
}

/// Directions on which `h_oracle ≤ h_reference` is checked before counting hits.
const CONTAINMENT_PROBES: usize = 256;

/// `|oracle|` as hit fraction times `|reference|`.
pub fn volume_mc(
    oracle: &dyn BodyOracle,
    reference: &dyn VolumeReference,
    n_samples: usize,
    seed: u64,
) -> Result<Estimate> {
    check_samples(n_samples)?;
    let n = oracle.dim();
    if reference.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: reference.dim() });
    }
    let probes = StreamFactory::new(seed, "containment");
    for i in 0..CONTAINMENT_PROBES {
        let u = unit_vector(&mut probes.rng(i as u64), n);
        let ho = oracle.support(&u)?.value;
        let hr = reference.support(&u)?.value;
        if ho > hr + 1e-9 * (1.0 + hr.abs()) {
            return Err(Error::ContainmentViolated);
        }
    }
    let stream = StreamId::new(seed, "volume");
    let factory = stream.factory();
    let hits: Vec<Result<bool>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let y = reference.sample_uniform(&mut factory.rng(i as u64));
            Ok(oracle.level(&y)? <= 1.0)
        })
        .collect();
    let mut count = 0;
    for h in hits {
        count += h? as usize;
    }
    let frac = Estimate::from_hits(count, n_samples, stream);
    let vol = reference.volume();
    Ok(Estimate { value: frac.value * vol, stderr: frac.stderr * vol, ..frac })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub burn_in: usize,
    pub thinning: usize,
    /// Defaults to the body's interior point.
    pub start: Option<Vec<f64>>,
}

impl ChainConfig {
    /// Burn-in `10n²` and thinning `n`.
    pub fn for_dim(n: usize) -> Self {
        Self { burn_in: 10 * n * n, thinning: n.max(1), start: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in == 0 || self.thinning == 0 {
            return Err(Error::InvalidConfig("burn_in and thinning must be at least 1".into()));
        }
        Ok(())
    }
}

const START_TOL: f64 = 1e-9;
const MIN_CHORD: f64 = 1e-12;

fn hit_and_run_rng(
    oracle: &dyn BodyOracle,
    chain: &ChainConfig,
    n_points: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    chain.validate()?;
    let n = oracle.dim();
    let mut x = chain.start.clone().unwrap_or_else(|| oracle.interior_point());
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    if oracle.level(&x)? > 1.0 - START_TOL {
        return Err(Error::StartNotInterior);
    }
    let mut step = |x: &mut Vec<f64>| -> Result<()> {
        let u = unit_vector(rng, n);
        let (lo, hi) = oracle.chord(x, &u)?;
        if !(hi - lo >= MIN_CHORD) {
            return Err(Error::ChordDegenerate(hi - lo));
        }
        let s = lo + (hi - lo) * rng.random::<f64>();
        x.iter_mut().zip(&u).for_each(|(a, b)| *a += s * b);
        Ok(())
    };
    for _ in 0..chain.burn_in {
        step(&mut x)?;
    }
    let mut out = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        for _ in 0..chain.thinning {
            step(&mut x)?;
        }
        out.push(x.clone());
    }
    Ok(out)
}

/// One hit-and-run chain on stream `(seed, "hit-and-run", 0)`.
pub fn hit_and_run(oracle: &dyn BodyOracle, chain: &ChainConfig, n_points: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = StreamId::new(seed, "hit-and-run").rng(0);
    let pts = hit_and_run_rng(oracle, chain, n_points, &mut rng)?;
    if log::log_enabled!(log::Level::Debug) && !pts.is_empty() {
        let first: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        log::debug!("hit-and-run: {} points, ESS of the first coordinate {:.1}", pts.len(), effective_sample_size(&first));
    }
    Ok(pts)
}

/// Independent chains run concurrently, chain `k` on stream `(seed, "hit-and-run", k)`.
pub fn hit_and_run_chains(
    oracle: &dyn BodyOracle,
    chain: &ChainConfig,
    n_chains: usize,
    points_per_chain: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let factory = StreamFactory::new(seed, "hit-and-run");
    let chains: Vec<Result<Vec<Vec<f64>>>> = (0..n_chains)
        .into_par_iter()
        .map(|k| hit_and_run_rng(oracle, chain, points_per_chain, &mut factory.rng(k as u64)))
        .collect();
    chains.into_iter().collect()
}

/// Effective sample size from Geyer's initial positive sequence of autocorrelations.
pub fn effective_sample_size(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 4 {
        return n as f64;
    }
    let mean = pairwise_sum(xs) / n as f64;
    let c: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let var = c.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if var == 0.0 {
        return n as f64;
    }
    let acf = |lag: usize| c[..n - lag].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / (n as f64 * var);
    let mut sum = 0.0;
    let mut lag = 1;
    while lag + 1 < n {
        let pair = acf(lag) + acf(lag + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        lag += 2;
    }
    n as f64 / (1.0 + 2.0 * sum).max(1.0 / n as f64)
}
