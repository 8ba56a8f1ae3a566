//! Versioned JSON run configurations. Unknown keys are rejected and every
//! default is written out when a configuration is echoed.

use std::path::{Path, PathBuf};

use fineq::applications::AuctionSpec;
use fineq::engine::TestSpec;
use fineq::montecarlo::ExperimentConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const CONFIG_VERSION: u32 = 1;

fn version() -> u32 {
    CONFIG_VERSION
}
fn bandwidth_factor() -> f64 {
    2.0
}
fn x_points() -> usize {
    101
}
fn mass_floor() -> f64 {
    fineq::estimators::DEFAULT_MASS_FLOOR
}
fn poly_order() -> usize {
    1
}
fn tau_range() -> (f64, f64) {
    (0.1, 0.9)
}
fn did_tau_points() -> usize {
    17
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanRunConfig {
    #[serde(default = "version")]
    pub version: u32,
    pub data: PathBuf,
    pub theta: f64,
    /// Defaults to the 5th to 95th covariate percentiles.
    #[serde(default)]
    pub x_region: Option<Vec<(f64, f64)>>,
    #[serde(default = "x_points")]
    pub x_points: usize,
    /// Defaults to `factor · ŝ_X · n^{-1/(4+d)}`.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default = "bandwidth_factor")]
    pub bandwidth_factor: f64,
    #[serde(default = "mass_floor")]
    pub mass_floor: f64,
    #[serde(default)]
    pub test: TestSpec,
    #[serde(default)]
    pub seed: u64,
}

impl MeanRunConfig {
    pub fn new(data: PathBuf, theta: f64) -> Self {
        Self {
            version: CONFIG_VERSION,
            data,
            theta,
            x_region: None,
            x_points: x_points(),
            bandwidth: None,
            bandwidth_factor: bandwidth_factor(),
            mass_floor: mass_floor(),
            test: TestSpec::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuctionRunConfig {
    #[serde(default = "version")]
    pub version: u32,
    pub data: PathBuf,
    #[serde(default)]
    pub spec: AuctionSpec,
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default = "bandwidth_factor")]
    pub bandwidth_factor: f64,
    #[serde(default)]
    pub test: TestSpec,
    #[serde(default)]
    pub seed: u64,
}

impl AuctionRunConfig {
    pub fn new(data: PathBuf) -> Self {
        Self {
            version: CONFIG_VERSION,
            data,
            spec: AuctionSpec::default(),
            bandwidth: None,
            bandwidth_factor: bandwidth_factor(),
            test: TestSpec::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DidRunConfig {
    #[serde(default = "version")]
    pub version: u32,
    pub data: PathBuf,
    pub period_t: i64,
    pub period_s: i64,
    /// Per-period bandwidths; default to the rule of thumb on each period.
    #[serde(default)]
    pub h_t: Option<f64>,
    #[serde(default)]
    pub h_s: Option<f64>,
    #[serde(default = "bandwidth_factor")]
    pub bandwidth_factor: f64,
    #[serde(default = "poly_order")]
    pub poly_order: usize,
    #[serde(default)]
    pub x_region: Option<Vec<(f64, f64)>>,
    #[serde(default = "x_points")]
    pub x_points: usize,
    #[serde(default = "tau_range")]
    pub tau_range: (f64, f64),
    #[serde(default = "did_tau_points")]
    pub tau_points: usize,
    #[serde(default = "mass_floor")]
    pub mass_floor: f64,
    #[serde(default)]
    pub test: TestSpec,
    #[serde(default)]
    pub seed: u64,
}

impl DidRunConfig {
    pub fn new(data: PathBuf, period_t: i64, period_s: i64) -> Self {
        Self {
            version: CONFIG_VERSION,
            data,
            period_t,
            period_s,
            h_t: None,
            h_s: None,
            bandwidth_factor: bandwidth_factor(),
            poly_order: poly_order(),
            x_region: None,
            x_points: x_points(),
            tau_range: tau_range(),
            tau_points: did_tau_points(),
            mass_floor: mass_floor(),
            test: TestSpec::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRunConfig {
    #[serde(default = "version")]
    pub version: u32,
    pub experiment: ExperimentConfig,
    /// Run every design, sample size and `θ` mode with these settings.
    #[serde(default)]
    pub long: bool,
}

/// Reads a configuration document and checks its version.
pub fn load<T: DeserializeOwned + Versioned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text)
}

pub fn parse<T: DeserializeOwned + Versioned>(text: &str) -> Result<T> {
    let cfg: T = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    if cfg.version() != CONFIG_VERSION {
        return Err(CliError::Config(format!(
            "unsupported config version {} (expected {CONFIG_VERSION})",
            cfg.version()
        )));
    }
    Ok(cfg)
}

pub trait Versioned {
    fn version(&self) -> u32;
}

macro_rules! versioned {
    ($($t:ty),*) => {
        $(impl Versioned for $t {
            fn version(&self) -> u32 {
                self.version
            }
        })*
    };
}

versioned!(MeanRunConfig, AuctionRunConfig, DidRunConfig, SimulateRunConfig);
