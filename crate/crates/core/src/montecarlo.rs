//! Simulation study for the conditional mean test: plateau-shaped DGPs,
//! coverage (CP) and false coverage (FCP) experiments, and their reports.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::applications::{MeanBuilder, MeanInequalitySpec};
use crate::engine::{run_test_multi, Form, TestResult, TestSpec, DEFAULT_ETA};
use crate::error::{Error, Result};
use crate::estimators::{Sample, DEFAULT_MASS_FLOOR};
use crate::numerics::{derive_seed, rule_of_thumb_bandwidth, Axis, EvalGrid, RandomSource, StreamRng};

/// Distance below `max f` at which false coverage is measured.
pub const FCP_OFFSET: f64 = 0.02;

/// Absolute bound of the truncated noise.
pub const NOISE_BOUND: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `L φ(x^10)`.
    As1,
    /// `L max{φ((x - 1.5)^10), φ((x + 1.5)^10)}`.
    As2,
    /// `f ≡ L`.
    Constant,
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn f_as(shape: Shape, l: f64, x: f64) -> f64 {
    match shape {
        Shape::As1 => l * std_normal_pdf(x.powi(10)),
        Shape::As2 => l * std_normal_pdf((x - 1.5).powi(10)).max(std_normal_pdf((x + 1.5).powi(10))),
        Shape::Constant => l,
    }
}

/// `Y = f(X) + U`, `X ~ U[-2, 2]`, `U = clamp(σ Ũ, -3, 3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    pub shape: Shape,
    #[serde(rename = "L")]
    pub l: f64,
    pub sigma: f64,
    pub n: usize,
}

impl DgpSpec {
    /// Designs 1 to 4: `(As1, 1)`, `(As1, 5)`, `(As2, 1)`, `(As2, 5)`.
    pub fn numbered(id: u8, n: usize) -> Result<Self> {
        let (shape, l) = match id {
            1 => (Shape::As1, 1.0),
            2 => (Shape::As1, 5.0),
            3 => (Shape::As2, 1.0),
            4 => (Shape::As2, 5.0),
            _ => return Err(Error::InvalidParameter(format!("DGP must be 1..=4, got {id}"))),
        };
        Ok(Self {
            shape,
            l,
            sigma: 1.0,
            n,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if self.shape != Shape::Constant && !(self.l > 0.0) {
            return Err(Error::InvalidParameter(format!("L must be positive, got {}", self.l)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidParameter(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        Ok(())
    }

    pub fn f(&self, x: f64) -> f64 {
        f_as(self.shape, self.l, x)
    }
}

pub fn truncate_noise(draw: f64, sigma: f64) -> f64 {
    (sigma * draw).clamp(-NOISE_BOUND, NOISE_BOUND)
}

/// Draws `(X_i, Ũ_i)` pairs in row order; normals come from the ziggurat
/// sampler of `rand_distr`.
pub fn sample_dgp(spec: &DgpSpec, rng: &mut StreamRng) -> Result<Sample> {
    spec.validate()?;
    let mut x = Vec::with_capacity(spec.n);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let xi: f64 = rng.random_range(-2.0..=2.0);
        let u: f64 = rng.sample(StandardNormal);
        x.push(xi);
        y.push(spec.f(xi) + truncate_noise(u, spec.sigma));
    }
    Sample::univariate(y, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThetaMode {
    /// `θ = max_{x ∈ 𝒳} f(x)`.
    #[default]
    Cp,
    /// `θ = max_{x ∈ 𝒳} f(x) - 0.02`.
    Fcp,
}

/// `max f` over `region` on a fine grid that includes the analytic maximisers.
pub fn null_theta(spec: &DgpSpec, mode: ThetaMode, region: (f64, f64)) -> f64 {
    let (lo, hi) = region;
    let steps = 36_000;
    let mut best = f64::NEG_INFINITY;
    for k in 0..=steps {
        let x = lo + (hi - lo) * k as f64 / steps as f64;
        best = best.max(spec.f(x));
    }
    for x in [0.0, -1.5, 1.5] {
        if (lo..=hi).contains(&x) {
            best = best.max(spec.f(x));
        }
    }
    match mode {
        ThetaMode::Cp => best,
        ThetaMode::Fcp => best - FCP_OFFSET,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dgp: DgpSpec,
    pub n_mc: usize,
    #[serde(default = "defaults::n_boot")]
    pub n_boot: usize,
    #[serde(default = "defaults::c_cs")]
    pub c_cs: Vec<f64>,
    #[serde(default = "defaults::alpha")]
    pub alpha: f64,
    #[serde(default = "defaults::p")]
    pub p: u32,
    #[serde(default)]
    pub form: Form,
    #[serde(default = "defaults::eta")]
    pub eta: f64,
    #[serde(default)]
    pub theta_mode: ThetaMode,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "defaults::x_region")]
    pub x_region: (f64, f64),
    #[serde(default = "defaults::x_points")]
    pub x_points: usize,
    #[serde(default = "defaults::bandwidth_factor")]
    pub bandwidth_factor: f64,
    #[serde(default = "defaults::bandwidth_exponent")]
    pub bandwidth_exponent: f64,
    #[serde(default = "defaults::mass_floor")]
    pub mass_floor: f64,
    /// Overrides the `θ` implied by `theta_mode`.
    #[serde(default)]
    pub theta: Option<f64>,
}

mod defaults {
    pub fn n_boot() -> usize {
        200
    }
    pub fn c_cs() -> Vec<f64> {
        vec![0.4, 0.5, 0.6]
    }
    pub fn alpha() -> f64 {
        0.05
    }
    pub fn p() -> u32 {
        1
    }
    pub fn eta() -> f64 {
        super::DEFAULT_ETA
    }
    pub fn x_region() -> (f64, f64) {
        (-1.8, 1.8)
    }
    pub fn x_points() -> usize {
        101
    }
    pub fn bandwidth_factor() -> f64 {
        2.0
    }
    pub fn bandwidth_exponent() -> f64 {
        -0.2
    }
    pub fn mass_floor() -> f64 {
        super::DEFAULT_MASS_FLOOR
    }
}

impl ExperimentConfig {
    pub fn new(dgp: DgpSpec, n_mc: usize, theta_mode: ThetaMode, master_seed: u64) -> Self {
        Self {
            dgp,
            n_mc,
            n_boot: defaults::n_boot(),
            c_cs: defaults::c_cs(),
            alpha: defaults::alpha(),
            p: defaults::p(),
            form: Form::default(),
            eta: defaults::eta(),
            theta_mode,
            master_seed,
            x_region: defaults::x_region(),
            x_points: defaults::x_points(),
            bandwidth_factor: defaults::bandwidth_factor(),
            bandwidth_exponent: defaults::bandwidth_exponent(),
            mass_floor: defaults::mass_floor(),
            theta: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self.n_mc < 1 {
            return Err(Error::InvalidParameter("n_mc must be at least 1".into()));
        }
        if self.c_cs.is_empty() {
            return Err(Error::InvalidParameter("at least one C_cs value is needed".into()));
        }
        self.test_spec(self.c_cs[0]).validate()?;
        for c in &self.c_cs {
            self.test_spec(*c).validate()?;
        }
        let (lo, hi) = self.x_region;
        if !(lo < hi) {
            return Err(Error::InvalidParameter(format!("empty test region ({lo}, {hi})")));
        }
        if !(self.bandwidth_factor > 0.0) {
            return Err(Error::InvalidParameter("bandwidth factor must be positive".into()));
        }
        Ok(())
    }

    pub fn test_spec(&self, c_cs: f64) -> TestSpec {
        TestSpec {
            p: self.p,
            form: self.form,
            alpha: self.alpha,
            eta: self.eta,
            c_cs,
            n_boot: self.n_boot,
            c_hat_override: None,
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
            .unwrap_or_else(|| null_theta(&self.dgp, self.theta_mode, self.x_region))
    }
}

/// Outcome of one replication at one `C_cs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub c_cs: f64,
    pub c_hat_n: f64,
    pub c_alpha_eta: f64,
    pub reject: bool,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub index: u64,
    /// Stream of the master seed the data were drawn from.
    pub data_stream: u64,
    pub bootstrap_seed: u64,
    pub h: f64,
    pub theta_hat: f64,
    pub outcomes: Vec<ReplicationOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub c_cs: f64,
    /// Non-rejection frequency.
    pub coverage: f64,
    /// `√(r (1 - r) / n_mc)`.
    pub mc_se: f64,
    pub non_rejections: usize,
    pub n_mc: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub theta: f64,
    pub cells: Vec<CoverageCell>,
    pub replications: Vec<ReplicationRecord>,
    pub wall_clock_secs: f64,
}

impl ExperimentReport {
    pub fn cell(&self, c_cs: f64) -> Option<&CoverageCell> {
        self.cells.iter().find(|c| c.c_cs == c_cs)
    }
}

/// One replication: data from stream `r` of the master seed, bootstrap
/// draws from `derive_seed(master, r)`.
pub fn run_replication(config: &ExperimentConfig, theta: f64, r: u64) -> Result<(ReplicationRecord, Vec<TestResult>)> {
    let mut rng = RandomSource::new(config.master_seed, r).rng();
    let sample = sample_dgp(&config.dgp, &mut rng)?;
    let h = rule_of_thumb_bandwidth(&sample.covariate(0), config.bandwidth_factor, config.bandwidth_exponent)?;
    let (lo, hi) = config.x_region;
    let grid = EvalGrid::over_x(vec![Axis::midpoints(lo, hi, config.x_points)?])?;
    let spec = MeanInequalitySpec {
        theta,
        x_region: vec![config.x_region],
    };
    let builder = MeanBuilder::new(&spec, grid, h)?.with_mass_floor(config.mass_floor);
    let seed = derive_seed(config.master_seed, r);
    let results = run_test_multi(&sample, &config.test_spec(config.c_cs[0]), &builder, seed, &config.c_cs)?;
    let record = ReplicationRecord {
        index: r,
        data_stream: r,
        bootstrap_seed: seed,
        h,
        theta_hat: results[0].theta_hat,
        outcomes: results
            .iter()
            .map(|t| ReplicationOutcome {
                c_cs: t.c_cs,
                c_hat_n: t.contact.c_hat_n,
                c_alpha_eta: t.summary.c_alpha_eta_star,
                reject: t.reject,
                p_value: t.p_value,
            })
            .collect(),
    };
    Ok((record, results))
}

/// Runs every replication in parallel; the report does not depend on the
/// schedule. The first failing replication (by index) aborts the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let start = Instant::now();
    let theta = config.theta();
    let outcomes: Vec<Result<ReplicationRecord>> = (0..config.n_mc as u64)
        .into_par_iter()
        .map(|r| {
            run_replication(config, theta, r)
                .map(|(rec, _)| rec)
                .map_err(|e| Error::Replication {
                    replication: r,
                    seed: config.master_seed,
                    source: Box::new(e),
                })
        })
        .collect();
    let replications = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let cells = config
        .c_cs
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let non_rejections = replications.iter().filter(|r| !r.outcomes[k].reject).count();
            let rate = non_rejections as f64 / config.n_mc as f64;
            CoverageCell {
                c_cs: c,
                coverage: rate,
                mc_se: (rate * (1.0 - rate) / config.n_mc as f64).sqrt(),
                non_rejections,
                n_mc: config.n_mc,
            }
        })
        .collect();
    Ok(ExperimentReport {
        config: config.clone(),
        theta,
        cells,
        replications,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

/// Every design, sample size and `θ` mode of the full study.
pub fn full_protocol(n_mc: usize, master_seed: u64) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for mode in [ThetaMode::Cp, ThetaMode::Fcp] {
        for id in 1..=4u8 {
            for n in [100, 250, 500, 1000] {
                let dgp = DgpSpec::numbered(id, n).expect("design ids 1..=4 are valid");
                out.push(ExperimentConfig::new(dgp, n_mc, mode, master_seed));
            }
        }
    }
    out
}
