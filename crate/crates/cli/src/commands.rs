//! The test and simulation commands, independent of argument parsing.

use std::time::Instant;

use fineq::applications::{
    normal_cdf_transform, percentile_region, AuctionBuilder, DiDBuilder, DiDSpec, MeanBuilder, MeanInequalitySpec,
};
use fineq::engine::{run_test, FieldBuilder, TestResult};
use fineq::estimators::Sample;
use fineq::montecarlo::{full_protocol, run_experiment, ExperimentReport};
use fineq::numerics::{rule_of_thumb_bandwidth, EvalGrid};

use crate::config::{AuctionRunConfig, DidRunConfig, MeanRunConfig, SimulateRunConfig};
use crate::error::{CliError, Result};
use crate::ingest::{ingest_csv, Ingested, Schema};
use crate::report::{DataSummary, ReportDocument};

pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A finished test with the grid it was evaluated on.
#[derive(Debug, Clone)]
pub struct TestRun<C> {
    pub report: ReportDocument<C, TestResult>,
    pub grid: EvalGrid,
}

/// `factor · ŝ · n^{-1/(4+d)}`, geometric mean over covariates.
pub fn rule_bandwidth(sample: &Sample, factor: f64) -> Result<f64> {
    let d = sample.dim();
    let exponent = -1.0 / (4.0 + d as f64);
    let mut log_sum = 0.0;
    for m in 0..d {
        log_sum += rule_of_thumb_bandwidth(&sample.covariate(m), factor, exponent)?.ln();
    }
    Ok((log_sum / d as f64).exp())
}

fn summary(data: &Ingested) -> DataSummary {
    DataSummary {
        rows: data.rows,
        observations: data.sample.len(),
        group_counts: data.group_counts.clone(),
    }
}

#[allow(clippy::too_many_arguments)]
fn finish<C>(
    command: &str,
    config: C,
    seed: u64,
    data: &Ingested,
    start: Instant,
    builder: &dyn FieldBuilder,
    sample: &Sample,
    test: &fineq::engine::TestSpec,
) -> Result<TestRun<C>> {
    let payload = run_test(sample, test, builder, seed)?;
    Ok(TestRun {
        report: ReportDocument {
            library_version: LIBRARY_VERSION.into(),
            command: command.into(),
            config,
            seed,
            data: Some(summary(data)),
            wall_clock_secs: start.elapsed().as_secs_f64(),
            payload,
        },
        grid: builder.grid().clone(),
    })
}

pub fn run_mean(cfg: &MeanRunConfig) -> Result<TestRun<MeanRunConfig>> {
    let start = Instant::now();
    cfg.test.validate()?;
    let data = ingest_csv(&cfg.data, Schema::Mean)?;
    let sample = &data.sample;
    let mut resolved = cfg.clone();
    let region = match &cfg.x_region {
        Some(r) => r.clone(),
        None => percentile_region(sample, 0.05, 0.95)?,
    };
    let h = match cfg.bandwidth {
        Some(h) => h,
        None => rule_bandwidth(sample, cfg.bandwidth_factor)?,
    };
    resolved.x_region = Some(region.clone());
    resolved.bandwidth = Some(h);
    let grid = EvalGrid::midpoint_box(&region, cfg.x_points, fineq::numerics::Axis::singleton(0.5))?;
    let spec = MeanInequalitySpec {
        theta: cfg.theta,
        x_region: region,
    };
    let builder = MeanBuilder::new(&spec, grid, h)?.with_mass_floor(cfg.mass_floor);
    finish("test-mean", resolved, cfg.seed, &data, start, &builder, sample, &cfg.test)
}

pub fn run_auction(cfg: &AuctionRunConfig) -> Result<TestRun<AuctionRunConfig>> {
    let start = Instant::now();
    cfg.test.validate()?;
    cfg.spec.validate()?;
    let data = ingest_csv(&cfg.data, Schema::Auction)?;
    let sample = if cfg.spec.cdf_transform {
        normal_cdf_transform(&data.sample)?
    } else {
        data.sample.clone()
    };
    for k in [cfg.spec.bidder_counts.0, cfg.spec.bidder_counts.1] {
        if !data.group_counts.contains_key(&k) {
            return Err(CliError::Data(format!("no auctions with {k} bidders")));
        }
    }
    let mut resolved = cfg.clone();
    let grid = cfg.spec.grid(&sample)?;
    resolved.spec.x_region = Some(grid.x_axes().iter().map(|a| a.bounds()).collect());
    let h = match cfg.bandwidth {
        Some(h) => h,
        None => rule_bandwidth(&sample, cfg.bandwidth_factor)?,
    };
    resolved.bandwidth = Some(h);
    let builder = AuctionBuilder::new(&cfg.spec, grid, h)?;
    finish("test-auction", resolved, cfg.seed, &data, start, &builder, &sample, &cfg.test)
}

pub fn run_did(cfg: &DidRunConfig) -> Result<TestRun<DidRunConfig>> {
    let start = Instant::now();
    cfg.test.validate()?;
    let data = ingest_csv(&cfg.data, Schema::Did)?;
    let sample = &data.sample;
    let period = |p: i64| -> Result<Sample> {
        let rows = sample.group_indices(p);
        if rows.is_empty() {
            return Err(CliError::Data(format!("period {p} has no observations")));
        }
        Ok(sample.select(&rows))
    };
    let h_t = match cfg.h_t {
        Some(h) => h,
        None => rule_bandwidth(&period(cfg.period_t)?, cfg.bandwidth_factor)?,
    };
    let h_s = match cfg.h_s {
        Some(h) => h,
        None => rule_bandwidth(&period(cfg.period_s)?, cfg.bandwidth_factor)?,
    };
    let spec = DiDSpec {
        period_t: cfg.period_t,
        period_s: cfg.period_s,
        h_t,
        h_s,
        poly_order: cfg.poly_order,
        x_region: cfg.x_region.clone(),
        x_points: cfg.x_points,
        tau_range: cfg.tau_range,
        tau_points: cfg.tau_points,
        mass_floor: cfg.mass_floor,
    };
    let grid = spec.grid(sample)?;
    let mut resolved = cfg.clone();
    resolved.h_t = Some(h_t);
    resolved.h_s = Some(h_s);
    resolved.x_region = Some(grid.x_axes().iter().map(|a| a.bounds()).collect());
    let builder = DiDBuilder::new(&spec, grid)?;
    finish("test-did", resolved, cfg.seed, &data, start, &builder, sample, &cfg.test)
}

pub fn run_simulate(cfg: &SimulateRunConfig) -> Result<ReportDocument<SimulateRunConfig, Vec<ExperimentReport>>> {
    let start = Instant::now();
    cfg.experiment.validate()?;
    let base = &cfg.experiment;
    let configs = if cfg.long {
        full_protocol(base.n_mc, base.master_seed)
            .into_iter()
            .map(|mut c| {
                c.dgp.sigma = base.dgp.sigma;
                c.n_boot = base.n_boot;
                c.c_cs = base.c_cs.clone();
                c.alpha = base.alpha;
                c.p = base.p;
                c.form = base.form;
                c.eta = base.eta;
                c.x_region = base.x_region;
                c.x_points = base.x_points;
                c.bandwidth_factor = base.bandwidth_factor;
                c.bandwidth_exponent = base.bandwidth_exponent;
                c.mass_floor = base.mass_floor;
                c
            })
            .collect()
    } else {
        vec![base.clone()]
    };
    let payload = configs.iter().map(run_experiment).collect::<fineq::Result<Vec<_>>>()?;
    Ok(ReportDocument {
        library_version: LIBRARY_VERSION.into(),
        command: "simulate".into(),
        config: cfg.clone(),
        seed: base.master_seed,
        data: None,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        payload,
    })
}
