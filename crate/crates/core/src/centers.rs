//! Barycenter and Santaló-point localization on the `e₀`-axis, closed-form
//! cone volumes and Grünbaum fractions.

use crate::bodies::{BodyOracle, HardBodyParams, LiftedHull};
use crate::design::QuasiOrthogonalSystem;
use crate::error::{Error, Result};
use crate::hardness::hull_for;
use crate::linalg::pairwise_sum;
use crate::polarity::PolarBody;
use crate::rng::StreamId;
use crate::sampling::{effective_sample_size, hit_and_run_chains, ChainConfig, Estimate};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Batches per chain for batch-means standard errors.
pub const BATCHES_PER_CHAIN: usize = 10;

/// Half-width of confidence intervals, in standard errors.
pub const CI_Z: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chain: ChainConfig,
    pub n_chains: usize,
    pub points_per_chain: usize,
}

impl SamplerConfig {
    /// `n_chains` chains with default burn-in and thinning for dimension `dim`.
    pub fn for_dim(dim: usize, n_chains: usize, points_per_chain: usize) -> Self {
        Self { chain: ChainConfig::for_dim(dim), n_chains, points_per_chain }
    }

    pub fn n_samples(&self) -> usize {
        self.n_chains * self.points_per_chain
    }

    fn validate(&self) -> Result<()> {
        if self.n_chains == 0 || self.points_per_chain < BATCHES_PER_CHAIN {
            return Err(Error::InvalidConfig(format!(
                "need at least one chain and {BATCHES_PER_CHAIN} points per chain"
            )));
        }
        self.chain.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterMethod {
    SampleMean,
    GrunbaumBisection,
    PolarRootFind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenterEstimate {
    /// Height on the `e₀`-axis.
    pub eta: f64,
    pub confidence_interval: (f64, f64),
    pub method: CenterMethod,
    pub n_samples: usize,
    pub stderr: f64,
    /// Norm of the off-axis part of the sample mean; zero in expectation for symmetric bodies.
    pub perp_norm: f64,
    /// Standard error of that norm's components, combined in quadrature.
    pub perp_stderr: f64,
}

/// Mean and batch-means standard error of a per-chain scalar series.
pub fn batch_means(chains: &[Vec<f64>]) -> (f64, f64) {
    let mut means = Vec::new();
    for c in chains {
        let len = c.len() / BATCHES_PER_CHAIN;
        for b in 0..BATCHES_PER_CHAIN {
            let s = &c[b * len..(b + 1) * len];
            means.push(pairwise_sum(s) / len as f64);
        }
    }
    crate::linalg::mean_stderr(&means)
}

/// Barycenter of a reflection-symmetric body from hit-and-run samples.
pub fn estimate_barycenter(oracle: &dyn BodyOracle, sampler: &SamplerConfig, seed: u64) -> Result<CenterEstimate> {
    sampler.validate()?;
    let chains = hit_and_run_chains(oracle, &sampler.chain, sampler.n_chains, sampler.points_per_chain, seed)?;
    let dim = oracle.dim();
    let coord = |k: usize| -> Vec<Vec<f64>> { chains.iter().map(|c| c.iter().map(|p| p[k]).collect()).collect() };
    let heights = coord(0);
    let (eta, se) = batch_means(&heights);
    if log::log_enabled!(log::Level::Debug) {
        let ess: f64 = heights.iter().map(|h| effective_sample_size(h)).sum();
        log::debug!("barycenter: ESS of heights {ess:.0} of {}", sampler.n_samples());
    }
    let mut perp2 = 0.0;
    let mut perp_var = 0.0;
    for k in 1..dim {
        let (m, s) = batch_means(&coord(k));
        perp2 += m * m;
        perp_var += s * s;
    }
    Ok(CenterEstimate {
        eta,
        confidence_interval: (eta - CI_Z * se, eta + CI_Z * se),
        method: CenterMethod::SampleMean,
        n_samples: sampler.n_samples(),
        stderr: se,
        perp_norm: perp2.sqrt(),
        perp_stderr: perp_var.sqrt(),
    })
}

/// The smaller of the two sample fractions cut by `⟨axis, x⟩ = cut`.
pub fn grunbaum_check(
    oracle: &dyn BodyOracle,
    axis: &[f64],
    cut: f64,
    sampler: &SamplerConfig,
    seed: u64,
) -> Result<Estimate> {
    sampler.validate()?;
    if axis.len() != oracle.dim() {
        return Err(Error::DimensionMismatch { expected: oracle.dim(), got: axis.len() });
    }
    let chains = hit_and_run_chains(oracle, &sampler.chain, sampler.n_chains, sampler.points_per_chain, seed)?;
    let above: Vec<Vec<f64>> = chains
        .iter()
        .map(|c| c.iter().map(|p| (crate::linalg::dot(axis, p) >= cut) as u8 as f64).collect())
        .collect();
    let (frac, se) = batch_means(&above);
    Ok(Estimate {
        value: frac.min(1.0 - frac),
        stderr: se,
        n_samples: sampler.n_samples(),
        stream: StreamId::new(seed, "hit-and-run"),
        upper_bound_only: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeVolumeKind {
    /// The part of `C₋` below height 0: `|Q₁| / (η(n+1))`.
    CMinusBelowZero,
    /// `C₋′`: `(1 + 0.98η)^{n+1} |Q_t°| / (η(n+1))`.
    CMinusPrime,
}

pub fn cone_volume_closed_form(kind: ConeVolumeKind, eta: f64, base_volume: &Estimate, n: usize) -> Result<Estimate> {
    if eta == 0.0 {
        return Err(Error::EtaZero);
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidConfig(format!("eta must be positive, got {eta}")));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("the cone formulas need n ≥ 1".into()));
    }
    let denom = eta * (n as f64 + 1.0);
    let factor = match kind {
        ConeVolumeKind::CMinusBelowZero => 1.0 / denom,
        ConeVolumeKind::CMinusPrime => (1.0 + crate::bodies::PRIME_CAP * eta).powi(n as i32 + 1) / denom,
    };
    Ok(Estimate { value: factor * base_volume.value, stderr: factor * base_volume.stderr, ..base_volume.clone() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SantaloConfig {
    pub sampler: SamplerConfig,
    /// Initial bracket for the shift `h`.
    pub bracket: (f64, f64),
    /// Stop once the bracket is narrower than this; defaults to `1/n²`.
    pub min_width: Option<f64>,
    pub max_iterations: usize,
}

/// `e₀`-coordinate of the barycenter of `(body(h))°` with its confidence interval.
fn polar_height(body: Arc<dyn BodyOracle>, sampler: &SamplerConfig, seed: u64) -> Result<CenterEstimate> {
    let polar = PolarBody::new(body)?;
    estimate_barycenter(&polar, sampler, seed)
}

/// Root of `h ↦ barycenter height of (K − h·e₀)°` by bisection.
///
/// `family(h)` returns `K − h·e₀`; `dim_for_width` sets the default stopping width `1/n²`.
pub fn estimate_santalo<F>(family: F, config: &SantaloConfig, dim_for_width: usize, seed: u64) -> Result<CenterEstimate>
where
    F: Fn(f64) -> Result<Arc<dyn BodyOracle>>,
{
    let min_width = config.min_width.unwrap_or(1.0 / (dim_for_width.max(1) as f64).powi(2));
    let eval = |h: f64, k: u64| polar_height(family(h)?, &config.sampler, seed.wrapping_add(k));
    let (mut lo, mut hi) = config.bracket;
    let mut calls = 0u64;
    let mut f_lo = eval(lo, calls)?;
    calls += 1;
    let mut f_hi = eval(hi, calls)?;
    calls += 1;
    let brackets = |a: &CenterEstimate, b: &CenterEstimate| a.confidence_interval.0 <= 0.0 && b.confidence_interval.1 >= 0.0;
    if !brackets(&f_lo, &f_hi) {
        let w = hi - lo;
        let (nlo, nhi) = (lo - w, hi + w);
        log::warn!("santalo bracket [{lo}, {hi}] does not bracket the root; widening to [{nlo}, {nhi}]");
        let (a, b) = (eval(nlo, calls), eval(nhi, calls + 1));
        calls += 2;
        match (a, b) {
            (Ok(a), Ok(b)) if brackets(&a, &b) => {
                lo = nlo;
                hi = nhi;
                f_lo = a;
                f_hi = b;
            }
            _ => return Err(Error::RootNotBracketed { lo: nlo, hi: nhi }),
        }
    }
    let _ = (&f_lo, &f_hi);
    let mut iterations = 0;
    let mut last = None;
    while hi - lo > min_width && iterations < config.max_iterations {
        let mid = 0.5 * (lo + hi);
        let f = eval(mid, calls)?;
        calls += 1;
        iterations += 1;
        let (a, b) = f.confidence_interval;
        if a <= 0.0 && b >= 0.0 {
            // the root is statistically indistinguishable from mid
            last = Some(mid);
            break;
        }
        if b < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eta = last.unwrap_or(0.5 * (lo + hi));
    Ok(CenterEstimate {
        eta,
        confidence_interval: (lo, hi),
        method: CenterMethod::PolarRootFind,
        n_samples: config.sampler.n_samples() * calls as usize,
        stderr: (hi - lo) / (2.0 * CI_Z),
        perp_norm: 0.0,
        perp_stderr: 0.0,
    })
}

/// Santaló point of a two-level hull, searched along its axis.
pub fn estimate_santalo_hull(hull: &LiftedHull, config: &SantaloConfig, seed: u64) -> Result<CenterEstimate> {
    let base = hull.clone();
    let family = move |h: f64| -> Result<Arc<dyn BodyOracle>> {
        if !(h > base.bottom && h < base.top) {
            return Err(Error::OriginNotInterior);
        }
        Ok(Arc::new(base.shifted(h)))
    };
    estimate_santalo(family, config, hull.n(), seed)
}

/// `−10 ln(2e)`
pub fn gamma_threshold() -> f64 {
    -10.0 * (1.0 + std::f64::consts::LN_2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub eta_g: f64,
    /// Barycenter height of `K(η_g)°`.
    pub gamma: CenterEstimate,
    pub threshold: f64,
    /// `γ̂ + 3·stderr ≥ threshold`
    pub passed: bool,
}

pub fn gamma_g_check(system: &QuasiOrthogonalSystem, eta_g: f64, sampler: &SamplerConfig, seed: u64) -> Result<GammaReport> {
    if !(eta_g > 0.0 && eta_g < 1.0) {
        return Err(Error::InvalidConfig(format!("eta_g must lie in (0, 1), got {eta_g}")));
    }
    let hull = hull_for(&HardBodyParams::new(system.clone(), eta_g, 1.0))?;
    let gamma = polar_height(Arc::new(hull), sampler, seed)?;
    let threshold = gamma_threshold();
    Ok(GammaReport { eta_g, passed: gamma.eta + CI_Z * gamma.stderr >= threshold, gamma, threshold })
}
