use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fineq::engine::{Form, TestSpec};
use fineq::montecarlo::{DgpSpec, ExperimentConfig, ThetaMode};
use fineq_cli::commands::{run_auction, run_did, run_mean, run_simulate, TestRun};
use fineq_cli::config::{self, AuctionRunConfig, DidRunConfig, MeanRunConfig, SimulateRunConfig};
use fineq_cli::report::{write_coverage_csv, write_grid_csv};
use fineq_cli::{CliError, Result};
use serde::Serialize;

/// Tests of functional inequalities with contact-set bootstrap critical values.
#[derive(Parser, Debug)]
#[command(name = "fineq", version)]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// H0: E[Y - θ | X = x] ≤ 0 on the test region.
    #[command(allow_negative_numbers = true)]
    TestMean(MeanArgs),
    /// Bid-quantile restrictions between two bidder counts.
    #[command(allow_negative_numbers = true)]
    TestAuction(AuctionArgs),
    /// Differences-in-differences in conditional quantiles between two periods.
    #[command(allow_negative_numbers = true)]
    TestDid(DidArgs),
    /// Coverage experiments for the mean test.
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum FormArg {
    Max,
    Sum,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModeArg {
    Cp,
    Fcp,
}

#[derive(Args, Debug)]
struct TestArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long, value_enum)]
    form: Option<FormArg>,
    #[arg(long)]
    ccs: Option<f64>,
    #[arg(long)]
    boot: Option<usize>,
    #[arg(long)]
    eta: Option<f64>,
    /// Fixed contact-set threshold in place of the data-driven rule.
    #[arg(long)]
    c_hat: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    x_points: Option<usize>,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-grid-point diagnostics (û, usability, contact sets).
    #[arg(long)]
    grid_csv: Option<PathBuf>,
}

impl TestArgs {
    fn apply(&self, test: &mut TestSpec, seed: &mut u64) {
        if let Some(v) = self.alpha {
            test.alpha = v;
        }
        if let Some(v) = self.p {
            test.p = v;
        }
        if let Some(v) = self.form {
            test.form = match v {
                FormArg::Max => Form::Max,
                FormArg::Sum => Form::Sum,
            };
        }
        if let Some(v) = self.ccs {
            test.c_cs = v;
        }
        if let Some(v) = self.boot {
            test.n_boot = v;
        }
        if let Some(v) = self.eta {
            test.eta = v;
        }
        if self.c_hat.is_some() {
            test.c_hat_override = self.c_hat;
        }
        if let Some(v) = self.seed {
            *seed = v;
        }
    }
}

#[derive(Args, Debug)]
struct MeanArgs {
    #[command(flatten)]
    common: TestArgs,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, requires = "x_hi")]
    x_lo: Option<f64>,
    #[arg(long, requires = "x_lo")]
    x_hi: Option<f64>,
}

#[derive(Args, Debug)]
struct AuctionArgs {
    #[command(flatten)]
    common: TestArgs,
    /// Local polynomial order.
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    tau_points: Option<usize>,
    /// Studentise the covariate and map it through the normal CDF.
    #[arg(long)]
    cdf_transform: bool,
}

#[derive(Args, Debug)]
struct DidArgs {
    #[command(flatten)]
    common: TestArgs,
    #[arg(long)]
    period_t: Option<i64>,
    #[arg(long)]
    period_s: Option<i64>,
    #[arg(long)]
    h_t: Option<f64>,
    #[arg(long)]
    h_s: Option<f64>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    tau_points: Option<usize>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Design 1 to 4.
    #[arg(long)]
    dgp: Option<u8>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated C_cs values.
    #[arg(long, value_delimiter = ',')]
    ccs: Option<Vec<f64>>,
    #[arg(long)]
    boot: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    theta_mode: Option<ModeArg>,
    /// Noise scale of the design.
    #[arg(long)]
    sigma: Option<f64>,
    /// Every design, sample size and θ mode.
    #[arg(long)]
    long: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Coverage table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn missing(flag: &str) -> CliError {
    CliError::Config(format!("--{flag} is required without --config"))
}

fn emit<C: Serialize>(run: &TestRun<C>, args: &TestArgs) -> Result<()> {
    let r = &run.report.payload;
    eprintln!(
        "theta_hat = {:.6}, critical value = {:.6}, c_hat_n = {:.4}, p-value = {:.4}, reject = {}",
        r.theta_hat, r.summary.c_alpha_eta_star, r.contact.c_hat_n, r.p_value, r.reject
    );
    if let Some(path) = &args.grid_csv {
        write_grid_csv(path, &run.grid, r)?;
    }
    match &args.out {
        Some(path) => run.report.write(path),
        None => {
            println!("{}", run.report.to_json()?);
            Ok(())
        }
    }
}

fn mean(args: &MeanArgs) -> Result<()> {
    let c = &args.common;
    let mut cfg = match &c.config {
        Some(path) => config::load::<MeanRunConfig>(path)?,
        None => MeanRunConfig::new(
            c.data.clone().ok_or_else(|| missing("data"))?,
            args.theta.ok_or_else(|| missing("theta"))?,
        ),
    };
    if let Some(d) = &c.data {
        cfg.data = d.clone();
    }
    if let Some(t) = args.theta {
        cfg.theta = t;
    }
    if let (Some(lo), Some(hi)) = (args.x_lo, args.x_hi) {
        cfg.x_region = Some(vec![(lo, hi)]);
    }
    if c.bandwidth.is_some() {
        cfg.bandwidth = c.bandwidth;
    }
    if let Some(v) = c.x_points {
        cfg.x_points = v;
    }
    c.apply(&mut cfg.test, &mut cfg.seed);
    emit(&run_mean(&cfg)?, c)
}

fn auction(args: &AuctionArgs) -> Result<()> {
    let c = &args.common;
    let mut cfg = match &c.config {
        Some(path) => config::load::<AuctionRunConfig>(path)?,
        None => AuctionRunConfig::new(c.data.clone().ok_or_else(|| missing("data"))?),
    };
    if let Some(d) = &c.data {
        cfg.data = d.clone();
    }
    if c.bandwidth.is_some() {
        cfg.bandwidth = c.bandwidth;
    }
    if let Some(v) = c.x_points {
        cfg.spec.x_points = v;
    }
    if let Some(v) = args.order {
        cfg.spec.poly_order = v;
    }
    if let Some(v) = args.tau_points {
        cfg.spec.tau_points = v;
    }
    if args.cdf_transform {
        cfg.spec.cdf_transform = true;
    }
    c.apply(&mut cfg.test, &mut cfg.seed);
    emit(&run_auction(&cfg)?, c)
}

fn did(args: &DidArgs) -> Result<()> {
    let c = &args.common;
    let mut cfg = match &c.config {
        Some(path) => config::load::<DidRunConfig>(path)?,
        None => DidRunConfig::new(
            c.data.clone().ok_or_else(|| missing("data"))?,
            args.period_t.ok_or_else(|| missing("period-t"))?,
            args.period_s.ok_or_else(|| missing("period-s"))?,
        ),
    };
    if let Some(d) = &c.data {
        cfg.data = d.clone();
    }
    if let Some(v) = args.period_t {
        cfg.period_t = v;
    }
    if let Some(v) = args.period_s {
        cfg.period_s = v;
    }
    if args.h_t.is_some() {
        cfg.h_t = args.h_t;
    }
    if args.h_s.is_some() {
        cfg.h_s = args.h_s;
    }
    if let Some(v) = c.x_points {
        cfg.x_points = v;
    }
    if let Some(v) = args.order {
        cfg.poly_order = v;
    }
    if let Some(v) = args.tau_points {
        cfg.tau_points = v;
    }
    c.apply(&mut cfg.test, &mut cfg.seed);
    emit(&run_did(&cfg)?, c)
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => config::load::<SimulateRunConfig>(path)?,
        None => {
            let dgp = DgpSpec::numbered(args.dgp.unwrap_or(1), args.n.ok_or_else(|| missing("n"))?)?;
            SimulateRunConfig {
                version: config::CONFIG_VERSION,
                experiment: ExperimentConfig::new(dgp, args.reps.ok_or_else(|| missing("reps"))?, ThetaMode::Cp, 0),
                long: false,
            }
        }
    };
    let e = &mut cfg.experiment;
    if let (Some(id), Some(_)) = (args.dgp, &args.config) {
        e.dgp = DgpSpec::numbered(id, e.dgp.n)?;
    }
    if let Some(n) = args.n {
        e.dgp.n = n;
    }
    if let Some(v) = args.sigma {
        e.dgp.sigma = v;
    }
    if let Some(v) = args.reps {
        e.n_mc = v;
    }
    if let Some(v) = &args.ccs {
        e.c_cs = v.clone();
    }
    if let Some(v) = args.boot {
        e.n_boot = v;
    }
    if let Some(v) = args.alpha {
        e.alpha = v;
    }
    if let Some(v) = args.seed {
        e.master_seed = v;
    }
    if let Some(m) = args.theta_mode {
        e.theta_mode = match m {
            ModeArg::Cp => ThetaMode::Cp,
            ModeArg::Fcp => ThetaMode::Fcp,
        };
    }
    if args.long {
        cfg.long = true;
    }
    let doc = run_simulate(&cfg)?;
    for r in &doc.payload {
        for c in &r.cells {
            eprintln!(
                "{:?} L={} n={} {:?} C_cs={}: coverage {:.3} (s.e. {:.3})",
                r.config.dgp.shape, r.config.dgp.l, r.config.dgp.n, r.config.theta_mode, c.c_cs, c.coverage, c.mc_se
            );
        }
    }
    if let Some(path) = &args.csv {
        write_coverage_csv(path, &doc.payload)?;
    }
    match &args.out {
        Some(path) => doc.write(path),
        None => {
            println!("{}", doc.to_json()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(fineq_cli::exit_code::CONFIG);
        }
    }
    let outcome = match &cli.command {
        Command::TestMean(a) => mean(a),
        Command::TestAuction(a) => auction(a),
        Command::TestDid(a) => did(a),
        Command::Simulate(a) => simulate(a),
    };
    match outcome {
        Ok(()) => ExitCode::from(fineq_cli::exit_code::OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
