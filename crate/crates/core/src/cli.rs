//! Batch experiment runner: `hardbody <command>` or `hardbody all --config run.json`.
//!
//! Each module writes `<module>.json` and `<module>.csv` into the output
//! directory. Exit codes: 0 when every check passes, 2 when only soft checks
//! warn, 1 on a failed hard check or runtime error, 64 on a configuration error.

use crate::approx::{greedy_polytope, random_vertex_polytope, sandwich_ratio, GreedyConfig};
use crate::bodies::{build_q, BodyOracle, HardBodyParams, LiftedHull, LiftedPoint};
use crate::centers::{estimate_barycenter, estimate_santalo_hull, gamma_g_check, grunbaum_check, SamplerConfig, SantaloConfig, CI_Z};
use crate::design::{generate_design, verify_design, DesignConfig, Mode, QuasiOrthogonalSystem};
use crate::error::{Error, Result};
use crate::hardness::{
    covering_certificate, hull_for, paper_constants, separation_report, verify_sandwich, CandidatePolytope, Conclusion,
};
use crate::polarity::dual_count;
use crate::rng::{gaussian_vec, StreamFactory};
use crate::sampling::{gaussian_norm_mean, hit_and_run_chains, mean_width, ChainConfig, Estimate};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_WARN: i32 = 2;
pub const EXIT_CONFIG: i32 = 64;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "HARDBODY_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSpec {
    Value(f64),
    /// Only `"auto"`: the estimated barycenter height of `K`.
    Keyword(String),
}

impl Default for EtaSpec {
    fn default() -> Self {
        EtaSpec::Keyword("auto".into())
    }
}

impl EtaSpec {
    fn parse(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Self::default());
        }
        s.parse::<f64>()
            .map(EtaSpec::Value)
            .map_err(|_| Error::InvalidConfig(format!("eta must be a number or \"auto\", got {s:?}")))
    }

    fn validate(&self) -> Result<()> {
        match self {
            EtaSpec::Keyword(k) if k == "auto" => Ok(()),
            EtaSpec::Keyword(k) => Err(Error::InvalidConfig(format!("unknown eta keyword {k:?}"))),
            EtaSpec::Value(v) if (0.0..=0.5).contains(v) => Ok(()),
            EtaSpec::Value(v) => Err(Error::InvalidConfig(format!("eta must lie in [0, 1/2], got {v}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateSpec {
    Random(usize),
    Greedy(usize),
}

impl CandidateSpec {
    /// `random:N=8` or `greedy:N=32`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("candidate must look like random:N=8 or greedy:N=32, got {s:?}"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let n: usize = rest.strip_prefix("N=").ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        match kind {
            "random" => Ok(Self::Random(n)),
            "greedy" => Ok(Self::Greedy(n)),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    pub chains: usize,
    pub points_per_chain: usize,
    pub directions: usize,
    pub gaussian_samples: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Self { chains: 4, points_per_chain: 2000, directions: 2000, gaussian_samples: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignParams {
    pub n: usize,
    pub m: usize,
}

impl Default for DesignParams {
    fn default() -> Self {
        Self { n: 256, m: 4096 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WidthsParams {
    pub n: usize,
    pub m: usize,
}

impl Default for WidthsParams {
    fn default() -> Self {
        Self { n: 64, m: 1024 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CentersParams {
    pub n: usize,
    pub m: usize,
    pub santalo: bool,
    pub gamma: bool,
}

impl Default for CentersParams {
    fn default() -> Self {
        Self { n: 16, m: 256, santalo: false, gamma: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HardnessParams {
    pub n: usize,
    pub m: usize,
    pub eta: EtaSpec,
    pub kappa: f64,
    pub candidate: String,
}

impl Default for HardnessParams {
    fn default() -> Self {
        Self { n: 16, m: 256, eta: EtaSpec::default(), kappa: 1.0, candidate: "random:N=8".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualParams {
    pub dims: Vec<usize>,
    pub count: usize,
    pub points: usize,
}

impl Default for DualParams {
    fn default() -> Self {
        Self { dims: vec![3, 4, 5], count: 20, points: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApproxParams {
    pub n: usize,
    pub m: usize,
    pub eta: EtaSpec,
    pub kappa: f64,
    pub candidate: String,
}

impl Default for ApproxParams {
    fn default() -> Self {
        Self { n: 16, m: 1024, eta: EtaSpec::default(), kappa: 1.0, candidate: "random:N=32".into() }
    }
}

/// The single JSON document accepted by `all --config`; absent fields take defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub mode: Mode,
    pub c_config: f64,
    pub output: PathBuf,
    pub tol: f64,
    pub budgets: Budgets,
    pub design: DesignParams,
    pub widths: WidthsParams,
    pub centers: CentersParams,
    pub hardness: HardnessParams,
    pub dual: DualParams,
    pub approx: ApproxParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            mode: Mode::Desk,
            c_config: 3.0,
            output: PathBuf::from("."),
            tol: 1e-9,
            budgets: Budgets::default(),
            design: DesignParams::default(),
            widths: WidthsParams::default(),
            centers: CentersParams::default(),
            hardness: HardnessParams::default(),
            dual: DualParams::default(),
            approx: ApproxParams::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Module {
    Design,
    Widths,
    Centers,
    Hardness,
    Dual,
    Approx,
}

impl Module {
    pub const ALL: [Module; 6] =
        [Module::Design, Module::Widths, Module::Centers, Module::Hardness, Module::Dual, Module::Approx];

    pub fn name(self) -> &'static str {
        match self {
            Module::Design => "design",
            Module::Widths => "widths",
            Module::Centers => "centers",
            Module::Hardness => "hardness",
            Module::Dual => "dual",
            Module::Approx => "approx",
        }
    }
}

impl ExperimentConfig {
    fn design_config(&self, n: usize, m: usize) -> DesignConfig {
        DesignConfig { n, m, c_config: self.c_config, seed: self.seed, mode: self.mode }
    }

    fn sampler(&self, dim: usize) -> SamplerConfig {
        SamplerConfig::for_dim(dim, self.budgets.chains, self.budgets.points_per_chain)
    }

    /// Rejects anything that would fail before computing.
    pub fn validate(&self, modules: &[Module]) -> Result<()> {
        let cfg_err = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.c_config > 0.0 && self.c_config.is_finite()) {
            return cfg_err(format!("c_config must be positive, got {}", self.c_config));
        }
        if !(self.tol > 0.0) {
            return cfg_err(format!("tol must be positive, got {}", self.tol));
        }
        let b = &self.budgets;
        if b.chains == 0 || b.points_per_chain < crate::centers::BATCHES_PER_CHAIN || b.gaussian_samples < 2 {
            return cfg_err("budgets need chains ≥ 1, points_per_chain ≥ 10 and gaussian_samples ≥ 2".into());
        }
        for &module in modules {
            match module {
                Module::Design => self.design_config(self.design.n, self.design.m).validate()?,
                Module::Widths => self.design_config(self.widths.n, self.widths.m).validate()?,
                Module::Centers => self.design_config(self.centers.n, self.centers.m).validate()?,
                Module::Hardness => {
                    let h = &self.hardness;
                    self.design_config(h.n, h.m).validate()?;
                    h.eta.validate()?;
                    check_kappa(h.kappa)?;
                    if let CandidateSpec::Greedy(k) = CandidateSpec::parse(&h.candidate)? {
                        check_vertices(k, h.n + 1)?;
                    }
                }
                Module::Dual => {
                    let d = &self.dual;
                    if d.dims.is_empty() || d.count == 0 {
                        return cfg_err("dual needs at least one dimension and a positive count".into());
                    }
                    for &dim in &d.dims {
                        if !(2..=crate::polarity::MAX_DUAL_DIM).contains(&dim) {
                            return cfg_err(format!("dual dimensions must lie in 2..={}", crate::polarity::MAX_DUAL_DIM));
                        }
                        if d.points < dim + 1 {
                            return cfg_err(format!("dual needs at least {} points in dimension {dim}", dim + 1));
                        }
                    }
                }
                Module::Approx => {
                    let a = &self.approx;
                    self.design_config(a.n, a.m).validate()?;
                    a.eta.validate()?;
                    check_kappa(a.kappa)?;
                    match CandidateSpec::parse(&a.candidate)? {
                        CandidateSpec::Random(k) | CandidateSpec::Greedy(k) => check_vertices(k, a.n + 1)?,
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa > 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("kappa must be positive, got {kappa}")))
    }
}

fn check_vertices(k: usize, dim: usize) -> Result<()> {
    if k < dim + 2 {
        return Err(Error::InvalidConfig(format!("this candidate needs N ≥ {} in dimension {dim}, got {k}", dim + 2)));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Info,
    Pass,
    Warn,
    Fail,
}

impl Status {
    fn as_str(self) -> &'static str {
        match self {
            Status::Info => "info",
            Status::Pass => "pass",
            Status::Warn => "warn",
            Status::Fail => "fail",
        }
    }
}

/// One CSV row: `quantity, value, stderr, n_samples, paper_bound, margin, status`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub quantity: String,
    pub value: f64,
    pub stderr: Option<f64>,
    pub n_samples: Option<usize>,
    pub paper_bound: Option<f64>,
    /// Positive when the check has room to spare.
    pub margin: Option<f64>,
    pub status: Status,
}

impl Check {
    pub fn info(quantity: &str, value: f64) -> Self {
        Self { quantity: quantity.into(), value, stderr: None, n_samples: None, paper_bound: None, margin: None, status: Status::Info }
    }

    /// `value ≥ bound` (or `≤` when `upper`); soft checks warn, hard ones fail.
    /// With a standard error the check allows `3·stderr` of slack.
    fn bound(quantity: &str, value: f64, est: Option<&Estimate>, bound: f64, upper: bool, hard: bool) -> Self {
        let margin = if upper { bound - value } else { value - bound };
        let slack = est.map_or(0.0, |e| CI_Z * e.stderr);
        let ok = margin + slack >= 0.0;
        let status = match (ok, hard) {
            (true, _) => Status::Pass,
            (false, true) => Status::Fail,
            (false, false) => Status::Warn,
        };
        Self {
            quantity: quantity.into(),
            value,
            stderr: est.map(|e| e.stderr),
            n_samples: est.map(|e| e.n_samples),
            paper_bound: Some(bound),
            margin: Some(margin),
            status,
        }
    }

    pub fn at_least(quantity: &str, value: f64, bound: f64, hard: bool) -> Self {
        Self::bound(quantity, value, None, bound, false, hard)
    }

    pub fn at_most(quantity: &str, value: f64, bound: f64, hard: bool) -> Self {
        Self::bound(quantity, value, None, bound, true, hard)
    }

    pub fn est_at_least(quantity: &str, est: &Estimate, bound: f64, hard: bool) -> Self {
        Self::bound(quantity, est.value, Some(est), bound, false, hard)
    }

    pub fn est_at_most(quantity: &str, est: &Estimate, bound: f64, hard: bool) -> Self {
        Self::bound(quantity, est.value, Some(est), bound, true, hard)
    }

    pub fn flag(quantity: &str, ok: bool, hard: bool) -> Self {
        let mut c = Self::info(quantity, ok as u8 as f64);
        c.status = match (ok, hard) {
            (true, _) => Status::Pass,
            (false, true) => Status::Fail,
            (false, false) => Status::Warn,
        };
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub module: String,
    pub seed: u64,
    pub mode: Mode,
    pub params: serde_json::Value,
    pub result: serde_json::Value,
    pub checks: Vec<Check>,
}

impl Report {
    fn new<P: Serialize, R: Serialize>(module: Module, cfg: &ExperimentConfig, params: &P, result: &R, checks: Vec<Check>) -> Result<Self> {
        Ok(Self {
            module: module.name().into(),
            seed: cfg.seed,
            mode: cfg.mode,
            params: serde_json::to_value(params)?,
            result: serde_json::to_value(result)?,
            checks,
        })
    }

    pub fn status(&self) -> Status {
        self.checks.iter().map(|c| c.status).max().unwrap_or(Status::Info)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(crate::json::to_string_pretty(self)?)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["quantity", "value", "stderr", "n_samples", "paper_bound", "margin", "status"])?;
        let opt = |v: Option<f64>| v.map(crate::json::fmt_f64).unwrap_or_default();
        for c in &self.checks {
            w.write_record([
                c.quantity.clone(),
                crate::json::fmt_f64(c.value),
                opt(c.stderr),
                c.n_samples.map(|n| n.to_string()).unwrap_or_default(),
                opt(c.paper_bound),
                opt(c.margin),
                c.status.as_str().to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv writes utf-8"))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{}.json", self.module)), self.to_json()?)?;
        std::fs::write(dir.join(format!("{}.csv", self.module)), self.to_csv()?)?;
        Ok(())
    }
}

fn system_for(cfg: &ExperimentConfig, n: usize, m: usize) -> Result<QuasiOrthogonalSystem> {
    generate_design(&cfg.design_config(n, m))
}

fn design_digest(system: &QuasiOrthogonalSystem) -> String {
    let mut h = Sha256::new();
    for v in &system.vectors {
        for x in v {
            h.update(x.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn run_design(cfg: &ExperimentConfig) -> Result<Report> {
    let p = &cfg.design;
    let dc = cfg.design_config(p.n, p.m);
    let system = generate_design(&dc)?;
    let report = verify_design(&system);
    let mut checks = vec![
        Check::flag("design_passed", report.passed, true),
        Check::info("norm_violations", report.norm_violations.len() as f64),
        Check::info("inner_product_violations", report.inner_product_violations.len() as f64),
        Check::info("min_norm_units", report.extremal_values.min_norm),
        Check::info("max_norm_units", report.extremal_values.max_norm),
        Check::info("max_inner_units", report.extremal_values.max_inner),
    ];
    let mut range = Check::flag("m_range", dc.in_range(), false);
    if cfg.mode == Mode::Desk {
        range.status = Status::Info;
    }
    checks.push(range);
    #[derive(Serialize)]
    struct Out {
        delta: f64,
        unit: f64,
        in_range: bool,
        sha256: String,
        report: crate::design::DesignReport,
    }
    let out = Out { delta: system.delta, unit: system.unit(), in_range: dc.in_range(), sha256: design_digest(&system), report };
    Report::new(Module::Design, cfg, p, &out, checks)
}

fn run_widths(cfg: &ExperimentConfig) -> Result<Report> {
    let p = &cfg.widths;
    let system = system_for(cfg, p.n, p.m)?;
    let q = build_q(&system)?;
    let w = mean_width(&q, cfg.budgets.gaussian_samples, cfg.seed)?;
    let ball = gaussian_norm_mean(p.n);
    let ratio = Estimate { value: w.value / ball, stderr: w.stderr / ball, ..w.clone() };
    // the asymptotic bound is 0.05 at C = 100 and Δ scales with C
    let bound = match cfg.mode {
        Mode::PaperFaithful => 0.05,
        Mode::Desk => 0.05 * 100.0 / cfg.c_config,
    };
    let checks = vec![
        Check::info("mean_width_ball", ball),
        Check { stderr: Some(w.stderr), n_samples: Some(w.n_samples), ..Check::info("mean_width_q", w.value) },
        Check::est_at_most("width_ratio", &ratio, bound, false),
    ];
    #[derive(Serialize)]
    struct Out {
        mean_width_q: Estimate,
        mean_width_ball: f64,
        ratio: Estimate,
        bound: f64,
    }
    Report::new(Module::Widths, cfg, p, &Out { mean_width_q: w, mean_width_ball: ball, ratio, bound }, checks)
}

fn base_hull(system: &QuasiOrthogonalSystem) -> Result<LiftedHull> {
    hull_for(&HardBodyParams::new(system.clone(), 0.0, 1.0))
}

#[derive(Clone, Debug, Serialize)]
struct EtaResolution {
    source: &'static str,
    eta: f64,
    stderr: Option<f64>,
    n_samples: Option<usize>,
}

/// `auto` becomes the estimated barycenter height of `K`, clamped to `[0, 1/2]`.
fn resolve_eta(cfg: &ExperimentConfig, system: &QuasiOrthogonalSystem, spec: &EtaSpec) -> Result<EtaResolution> {
    match spec {
        EtaSpec::Value(v) => Ok(EtaResolution { source: "given", eta: *v, stderr: None, n_samples: None }),
        EtaSpec::Keyword(_) => {
            let hull = base_hull(system)?;
            let e = estimate_barycenter(&hull, &cfg.sampler(system.n + 1), cfg.seed)?;
            Ok(EtaResolution { source: "auto", eta: e.eta.clamp(0.0, 0.5), stderr: Some(e.stderr), n_samples: Some(e.n_samples) })
        }
    }
}

fn run_centers(cfg: &ExperimentConfig) -> Result<Report> {
    let p = &cfg.centers;
    let system = system_for(cfg, p.n, p.m)?;
    let hull = base_hull(&system)?;
    let sampler = cfg.sampler(p.n + 1);
    let bary = estimate_barycenter(&hull, &sampler, cfg.seed)?;
    let n1 = p.n as f64 + 1.0;
    let eta_est = Estimate {
        value: bary.eta,
        stderr: bary.stderr,
        n_samples: bary.n_samples,
        stream: crate::rng::StreamId::new(cfg.seed, "hit-and-run"),
        upper_bound_only: false,
    };
    let mut axis = vec![0.0; p.n + 1];
    axis[0] = 1.0;
    let grunbaum = grunbaum_check(&hull, &axis, bary.eta, &sampler, cfg.seed.wrapping_add(1))?;
    let mut checks = vec![
        Check::est_at_least("barycenter_lower", &eta_est, 1.0 / (10.0 * n1), false),
        Check::est_at_most("barycenter_upper", &eta_est, 10.0 / n1, false),
        Check::at_most("barycenter_perp_norm", bary.perp_norm, 4.0 * bary.perp_stderr, false),
        Check::est_at_least("grunbaum_fraction", &grunbaum, (-1.0f64).exp(), false),
    ];
    let mut santalo = None;
    if p.santalo {
        let sc = SantaloConfig {
            sampler: sampler.clone(),
            bracket: (0.5 / n1, (10.0 / n1).min(0.9)),
            min_width: None,
            max_iterations: 20,
        };
        match estimate_santalo_hull(&hull, &sc, cfg.seed.wrapping_add(2)) {
            Ok(s) => {
                checks.push(Check::at_most("santalo_upper", s.confidence_interval.0, 10.0 / n1, false));
                checks.push(Check::at_least("santalo_lower", s.confidence_interval.1, 0.0, false));
                santalo = Some(s);
            }
            Err(Error::RootNotBracketed { lo, hi }) => {
                log::warn!("santalo root not bracketed on [{lo}, {hi}]");
                checks.push(Check::flag("santalo_bracketed", false, false));
            }
            Err(e) => return Err(e),
        }
    }
    let mut gamma = None;
    if p.gamma {
        let g = gamma_g_check(&system, bary.eta.clamp(1e-6, 1.0 - 1e-6), &sampler, cfg.seed.wrapping_add(3))?;
        let est = Estimate { value: g.gamma.eta, stderr: g.gamma.stderr, n_samples: g.gamma.n_samples, ..eta_est.clone() };
        checks.push(Check::est_at_least("gamma_g", &est, g.threshold, false));
        gamma = Some(g);
    }
    #[derive(Serialize)]
    struct Out {
        barycenter: crate::centers::CenterEstimate,
        grunbaum: Estimate,
        santalo: Option<crate::centers::CenterEstimate>,
        gamma: Option<crate::centers::GammaReport>,
    }
    Report::new(Module::Centers, cfg, p, &Out { barycenter: bary, grunbaum, santalo, gamma }, checks)
}

/// Candidate vertices inside `hull`. Random candidates are raw hit-and-run
/// samples, so `N` may be below `n + 2` here.
fn build_candidate(cfg: &ExperimentConfig, hull: &LiftedHull, spec: CandidateSpec) -> Result<CandidatePolytope> {
    match spec {
        CandidateSpec::Random(k) => {
            let chain = ChainConfig::for_dim(hull.dim());
            if k >= hull.dim() + 2 {
                return random_vertex_polytope(hull, k, &chain, cfg.budgets.chains, cfg.seed);
            }
            let per = k.div_ceil(cfg.budgets.chains);
            let pts: Vec<Vec<f64>> =
                hit_and_run_chains(hull, &chain, cfg.budgets.chains, per, cfg.seed)?.into_iter().flatten().take(k).collect();
            CandidatePolytope::from_points(&pts, format!("random:N={k}"))
        }
        CandidateSpec::Greedy(k) => greedy_polytope(hull, &GreedyConfig::new(k, cfg.budgets.directions), cfg.seed),
    }
}

fn run_hardness(cfg: &ExperimentConfig) -> Result<Report> {
    let p = &cfg.hardness;
    let system = system_for(cfg, p.n, p.m)?;
    let eta = resolve_eta(cfg, &system, &p.eta)?;
    let sep = separation_report(&system, eta.eta)?;
    let constants = paper_constants(p.n, p.m, p.kappa, cfg.c_config)?;
    let params = HardBodyParams::new(system.clone(), eta.eta, p.kappa);
    let hull = hull_for(&params)?;
    let candidate = build_candidate(cfg, &hull, CandidateSpec::parse(&p.candidate)?)?;
    let sandwich = verify_sandwich(&candidate, &params, &hull, constants.r, cfg.budgets.directions, cfg.seed, cfg.tol)?;
    let claims = sandwich.inner_ok && sandwich.outer_necessary_passed;
    let cert = covering_certificate(&candidate, &system, p.kappa, claims)?;
    let checks = vec![
        Check::info("eta", eta.eta),
        Check::at_most("separation_identity_rel_error", sep.identity_max_rel_error, crate::hardness::IDENTITY_REL_TOL, true),
        Check::at_most("separation_off_diagonal_violations", sep.off_diagonal_violations as f64, 0.0, true),
        Check::info("diagonal_lower_failures", sep.diagonal_lower_failures as f64),
        Check::info("diagonal_upper_failures", sep.diagonal_upper_failures as f64),
        Check::info("sandwich_r", constants.r),
        Check::flag("sandwich_inner", sandwich.inner_ok, true),
        Check::flag("sandwich_outer_necessary", sandwich.outer_necessary_passed, false),
        Check::info("candidate_vertices", candidate.len() as f64),
        Check::info("uncovered_indices", cert.uncovered.len() as f64),
        Check::at_most("max_cover", cert.max_cover as f64, cert.per_vertex_bound, false),
        Check::flag("certificate_consistent", cert.conclusion != Conclusion::SandwichViolated, true),
        Check::info("implied_lower_bound", cert.implied_lower_bound),
    ];
    #[derive(Serialize)]
    struct Out {
        eta: EtaResolution,
        constants: crate::hardness::PaperConstants,
        separation: crate::hardness::SeparationReport,
        candidate_label: String,
        sandwich: crate::hardness::SandwichReport,
        certificate: crate::hardness::CoveringCertificate,
    }
    let out = Out { eta, constants, separation: sep, candidate_label: candidate.label.clone(), sandwich, certificate: cert };
    Report::new(Module::Hardness, cfg, p, &out, checks)
}

fn run_dual(cfg: &ExperimentConfig) -> Result<Report> {
    let p = &cfg.dual;
    let factory = StreamFactory::new(cfg.seed, "dual-polytopes");
    let mut counts = Vec::new();
    let mut mismatches = 0usize;
    let mut index = 0u64;
    for &dim in &p.dims {
        for _ in 0..p.count {
            let mut rng = factory.rng(index);
            index += 1;
            let mut pts: Vec<Vec<f64>> = (0..p.points).map(|_| gaussian_vec(&mut rng, dim)).collect();
            // centering at the vertex mean puts the origin inside
            let mut mean = vec![0.0; dim];
            for q in &pts {
                for (m, x) in mean.iter_mut().zip(q) {
                    *m += x / p.points as f64;
                }
            }
            for q in &mut pts {
                for (x, m) in q.iter_mut().zip(&mean) {
                    *x -= m;
                }
            }
            let c = dual_count(&CandidatePolytope::from_points(&pts, format!("gaussian:{dim}"))?)?;
            mismatches += !c.counts_match as usize;
            counts.push(c);
        }
    }
    let checks = vec![
        Check::info("polytopes", counts.len() as f64),
        Check::at_most("dual_count_mismatches", mismatches as f64, 0.0, true),
    ];
    Report::new(Module::Dual, cfg, p, &counts, checks)
}

fn run_approx(cfg: &ExperimentConfig) -> Result<Report> {
    let p = &cfg.approx;
    let system = system_for(cfg, p.n, p.m)?;
    let eta = resolve_eta(cfg, &system, &p.eta)?;
    let constants = paper_constants(p.n, p.m, p.kappa, cfg.c_config)?;
    let hull = hull_for(&HardBodyParams::new(system, eta.eta, p.kappa))?;
    let candidate = build_candidate(cfg, &hull, CandidateSpec::parse(&p.candidate)?)?;
    let center = estimate_barycenter(&hull, &cfg.sampler(p.n + 1), cfg.seed.wrapping_add(4))?;
    let c = LiftedPoint::new(center.eta, vec![0.0; p.n]);
    // A hull missing the center cannot be scaled to cover K about it: λ = ∞.
    let (ratio, interior) = match sandwich_ratio(&candidate, &hull, &c, cfg.budgets.directions, cfg.seed) {
        Ok(r) => (r, true),
        Err(Error::CenterNotInterior) => {
            (crate::approx::RatioEstimate { lambda_lower: f64::INFINITY, lambda_estimate: f64::INFINITY, directions_used: 0 }, false)
        }
        Err(e) => return Err(e),
    };
    let checks = vec![
        Check::info("eta", eta.eta),
        Check::info("center_height", center.eta),
        Check::flag("center_interior", interior, false),
        Check::info("lambda_estimate", ratio.lambda_estimate),
        Check::at_least("lambda_lower_vs_r", ratio.lambda_lower, constants.r, false),
    ];
    #[derive(Serialize)]
    struct Out {
        eta: EtaResolution,
        center: crate::centers::CenterEstimate,
        candidate_label: String,
        vertices: usize,
        r: f64,
        ratio: crate::approx::RatioEstimate,
    }
    let out = Out { eta, center, candidate_label: candidate.label.clone(), vertices: candidate.len(), r: constants.r, ratio };
    Report::new(Module::Approx, cfg, p, &out, checks)
}

pub fn run_module(cfg: &ExperimentConfig, module: Module) -> Result<Report> {
    log::info!("running {}", module.name());
    match module {
        Module::Design => run_design(cfg),
        Module::Widths => run_widths(cfg),
        Module::Centers => run_centers(cfg),
        Module::Hardness => run_hardness(cfg),
        Module::Dual => run_dual(cfg),
        Module::Approx => run_approx(cfg),
    }
}

#[derive(Parser, Debug)]
#[command(name = "hardbody", version, about = "Hard-to-approximate convex bodies: construction, certificates and estimators")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// desk or paper-faithful
    #[arg(long, global = true)]
    mode: Option<String>,
    /// The constant C in Δ = C·√(ln m)
    #[arg(long = "c-config", global = true)]
    c_config: Option<f64>,
    /// Output directory for the JSON and CSV reports
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    chains: Option<usize>,
    #[arg(long = "points-per-chain", global = true)]
    points_per_chain: Option<usize>,
    #[arg(long, global = true)]
    directions: Option<usize>,
    #[arg(long = "gaussian-samples", global = true)]
    gaussian_samples: Option<usize>,
}

#[derive(Args, Debug)]
struct Size {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate and verify a quasi-orthogonal design
    Design(Size),
    /// Gaussian mean width of Q against the ball
    Widths(Size),
    /// Barycenter, Grünbaum fraction and optional Santaló / γ checks for K
    Centers {
        #[command(flatten)]
        size: Size,
        #[arg(long)]
        santalo: bool,
        #[arg(long)]
        gamma: bool,
    },
    /// Separation report, sandwich checks and covering certificate
    Hardness {
        #[command(flatten)]
        size: Size,
        #[arg(long, default_value = "auto")]
        eta: String,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long, default_value = "random:N=8")]
        candidate: String,
    },
    /// Facet counts against polar vertex counts on random polytopes
    Dual {
        #[arg(long, value_delimiter = ',', default_value = "3,4,5")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 10)]
        points: usize,
    },
    /// Sandwich ratio of a baseline polytope in K(η, κ)
    Approx {
        #[command(flatten)]
        size: Size,
        #[arg(long, default_value = "auto")]
        eta: String,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long, default_value = "random:N=32")]
        candidate: String,
    },
    /// Every module from one JSON config
    All {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "desk" => Ok(Mode::Desk),
        "paper-faithful" | "paper_faithful" => Ok(Mode::PaperFaithful),
        _ => Err(Error::InvalidConfig(format!("mode must be desk or paper-faithful, got {s:?}"))),
    }
}

fn build_config(cli: Cli) -> Result<(ExperimentConfig, Vec<Module>)> {
    let (mut cfg, modules) = match cli.command {
        Command::All { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", config.display())))?;
            let cfg: ExperimentConfig =
                serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("bad config {}: {e}", config.display())))?;
            (cfg, Module::ALL.to_vec())
        }
        cmd => {
            let mut cfg = ExperimentConfig::default();
            let module = match cmd {
                Command::Design(s) => {
                    cfg.design = DesignParams { n: s.n, m: s.m };
                    Module::Design
                }
                Command::Widths(s) => {
                    cfg.widths = WidthsParams { n: s.n, m: s.m };
                    Module::Widths
                }
                Command::Centers { size, santalo, gamma } => {
                    cfg.centers = CentersParams { n: size.n, m: size.m, santalo, gamma };
                    Module::Centers
                }
                Command::Hardness { size, eta, kappa, candidate } => {
                    cfg.hardness = HardnessParams { n: size.n, m: size.m, eta: EtaSpec::parse(&eta)?, kappa, candidate };
                    Module::Hardness
                }
                Command::Dual { dims, count, points } => {
                    cfg.dual = DualParams { dims, count, points };
                    Module::Dual
                }
                Command::Approx { size, eta, kappa, candidate } => {
                    cfg.approx = ApproxParams { n: size.n, m: size.m, eta: EtaSpec::parse(&eta)?, kappa, candidate };
                    Module::Approx
                }
                Command::All { .. } => unreachable!(),
            };
            (cfg, vec![module])
        }
    };
    let g = cli.global;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(m) = g.mode {
        cfg.mode = parse_mode(&m)?;
    }
    if let Some(c) = g.c_config {
        cfg.c_config = c;
    }
    if let Some(o) = g.out {
        cfg.output = o;
    }
    if let Some(t) = g.tol {
        cfg.tol = t;
    }
    if let Some(v) = g.chains {
        cfg.budgets.chains = v;
    }
    if let Some(v) = g.points_per_chain {
        cfg.budgets.points_per_chain = v;
    }
    if let Some(v) = g.directions {
        cfg.budgets.directions = v;
    }
    if let Some(v) = g.gaussian_samples {
        cfg.budgets.gaussian_samples = v;
    }
    cfg.validate(&modules)?;
    Ok((cfg, modules))
}

fn exit_for_error(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::Json(_) => EXIT_CONFIG,
        _ => EXIT_FAIL,
    }
}

/// Parses `argv` (program name first), runs the selected modules and writes their reports.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (cfg, modules) = match build_config(cli) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("hardbody: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut worst = Status::Info;
    for module in modules {
        let report = match run_module(&cfg, module) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("hardbody {}: {e}", module.name());
                return exit_for_error(&e);
            }
        };
        if let Err(e) = report.write(&cfg.output) {
            eprintln!("hardbody {}: {e}", module.name());
            return EXIT_FAIL;
        }
        let status = report.status();
        for c in report.checks.iter().filter(|c| c.status >= Status::Warn) {
            log::warn!("{}: {} = {} ({})", module.name(), c.quantity, c.value, c.status.as_str());
        }
        println!("{}: {}", module.name(), status.as_str());
        worst = worst.max(status);
    }
    match worst {
        Status::Fail => EXIT_FAIL,
        Status::Warn => EXIT_WARN,
        _ => EXIT_OK,
    }
}

/// Sets up logging and the worker pool from the environment, then runs.
pub fn main_entry() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(t) if t > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
            }
            _ => {
                eprintln!("hardbody: {THREADS_ENV} must be a positive integer, got {v:?}");
                return EXIT_CONFIG;
            }
        }
    }
    run(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn candidate_spec_parsing() {
        assert_eq!(CandidateSpec::parse("random:N=8").unwrap(), CandidateSpec::Random(8));
        assert_eq!(CandidateSpec::parse("greedy:N=32").unwrap(), CandidateSpec::Greedy(32));
        for bad in ["random", "random:8", "cube:N=3", "random:N=0", "random:N=x"] {
            assert!(CandidateSpec::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn eta_spec_round_trip() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"hardness": {"eta": 0.25}, "approx": {"eta": "auto"}}"#).unwrap();
        assert_eq!(cfg.hardness.eta, EtaSpec::Value(0.25));
        assert_eq!(cfg.approx.eta, EtaSpec::default());
        let bad: ExperimentConfig = serde_json::from_str(r#"{"hardness": {"eta": "soon"}}"#).unwrap();
        assert!(bad.validate(&[Module::Hardness]).is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sed": 1}"#).is_err());
    }

    #[test]
    fn validation_rejects_bad_sizes() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.validate(&Module::ALL).is_ok());
        cfg.approx.candidate = "random:N=8".into();
        assert!(cfg.validate(&[Module::Approx]).is_err());
        assert!(cfg.validate(&[Module::Hardness]).is_ok());
        cfg.dual.dims = vec![9];
        assert!(cfg.validate(&[Module::Dual]).is_err());
        cfg.mode = Mode::PaperFaithful;
        cfg.design = DesignParams { n: 16, m: 4096 };
        assert!(cfg.validate(&[Module::Design]).is_err());
    }

    #[test]
    fn check_statuses() {
        assert_eq!(Check::at_most("a", 1.0, 2.0, true).status, Status::Pass);
        assert_eq!(Check::at_most("a", 3.0, 2.0, true).status, Status::Fail);
        assert_eq!(Check::at_least("a", 1.0, 2.0, false).status, Status::Warn);
        let e = Estimate { value: 1.9, stderr: 0.1, n_samples: 10, stream: crate::rng::StreamId::new(0, "x"), upper_bound_only: false };
        assert_eq!(Check::est_at_least("a", &e, 2.0, true).status, Status::Pass);
        assert_eq!(Check::at_most("a", 3.0, 2.0, true).margin, Some(-1.0));
    }

    #[test]
    fn csv_has_fixed_columns() {
        let cfg = ExperimentConfig::default();
        let r = Report::new(Module::Dual, &cfg, &cfg.dual, &0u8, vec![Check::info("x", 0.5)]).unwrap();
        let csv = r.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "quantity,value,stderr,n_samples,paper_bound,margin,status");
        assert_eq!(lines.next().unwrap(), "x,5.0000000000000000e-1,,,,,info");
    }

    #[test]
    fn usage_errors_exit_64() {
        assert_eq!(run(["hardbody", "frobnicate"]), EXIT_CONFIG);
        assert_eq!(run(["hardbody", "design", "--n", "16"]), EXIT_CONFIG);
        assert_eq!(run(["hardbody", "approx", "--n", "16", "--m", "256", "--candidate", "random:N=8"]), EXIT_CONFIG);
        assert_eq!(run(["hardbody", "--help"]), EXIT_OK);
    }
}
