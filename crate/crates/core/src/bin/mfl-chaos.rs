use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfl_chaos::harness::{self, ExperimentConfig, FitModel};

#[derive(Parser)]
#[command(version, about = "Mean-field Langevin particle experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replica-level parallelism.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Derivative consistency and discrete entropy identities.
    Validate,
    /// Invariant measure of the one-dimensional problem.
    Gibbs,
    /// Coupled particle runs for every n and replica.
    Simulate,
    /// Propagation-of-chaos sweep with fitted rates.
    PocSweep,
    /// Fit a rate model to report tables.
    RateFit {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long, value_enum)]
        model: FitModel,
        /// Abscissa column (defaults to `n` or `t`).
        #[arg(long)]
        x: Option<String>,
        /// Ordinate column (defaults to `mean_value` or `value`).
        #[arg(long)]
        y: Option<String>,
    },
    /// Chain-rule identity on random discrete joints.
    EntropyChain,
}

fn load(cli: &Cli) -> mfl_chaos::Result<ExperimentConfig> {
    let path = cli.config.as_ref().ok_or_else(|| mfl_chaos::Error::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> mfl_chaos::Result<bool> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Validate => {
            let r = harness::cmd_validate(&load(cli)?, out)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            Ok(r.passed())
        }
        Command::Gibbs => {
            let r = harness::cmd_gibbs(&load(cli)?, out)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            Ok(r.converged)
        }
        Command::Simulate => {
            let r = harness::cmd_simulate(&load(cli)?, out)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            Ok(r.failures.is_empty())
        }
        Command::PocSweep => {
            let r = harness::cmd_poc_sweep(&load(cli)?, out)?;
            let a = &r.analysis;
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "sup_gap_slope": a.sup_gap_slope,
                    "mismatch_slope": a.mismatch_slope,
                    "value_slope": a.value_slope,
                    "growth_ratio": a.growth_ratio,
                    "failures": a.failures,
                }))?
            );
            Ok(a.failures.is_empty())
        }
        Command::RateFit { reports, model, x, y } => {
            let (dx, dy) = model.columns();
            let columns = (x.as_deref().unwrap_or(dx), y.as_deref().unwrap_or(dy));
            let rows = harness::cmd_rate_fit(reports, *model, Some(columns), cli.seed.unwrap_or(0), out)?;
            for r in &rows {
                println!("{} {} {} = {:.6} [{:.6}, {:.6}]", r.source, r.model, r.parameter, r.estimate, r.lower, r.upper);
            }
            Ok(true)
        }
        Command::EntropyChain => {
            let r = harness::cmd_entropy_chain(&load(cli)?, out)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            Ok(r.passed(harness::CHAIN_TOL))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
