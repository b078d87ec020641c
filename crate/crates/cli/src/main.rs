use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use recsys_evalkit_cli::commands;
use recsys_evalkit_cli::{ExperimentConfig, OUT_ENV};

#[derive(Parser)]
#[command(name = "recsys-evalkit", version, about = "Evaluate top-n recommenders with nested cross-validation")]
struct Cli {
    /// Experiment configuration (TOML); defaults apply to absent keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for models, search, split and simulation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output root.
    #[arg(long, global = true, env = OUT_ENV)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Binarize and L-core filter the raw log into the canonical format.
    Preprocess,
    /// Dataset statistics and arrival rates.
    Stats,
    /// Write the user folds and held-out items.
    Split,
    /// Nested cross-validation of every configured model.
    Run,
    /// Compare two reports with confidence intervals and McNemar tests.
    Compare {
        report_a: PathBuf,
        report_b: PathBuf,
        /// Significance level; defaults to stats.alpha.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Split-by-ratio simulation.
    Simulate,
    /// Search traces of all three strategies on one inner split.
    Trace,
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().context("configuring the worker pool")?;
    }
    let mut config = ExperimentConfig::load_or_default(cli.config.as_deref())?.with_overrides(cli.seed, cli.out);
    config.validate()?;
    match cli.command {
        Command::Preprocess => {
            let s = commands::cmd_preprocess(&config)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
        Command::Stats => {
            let s = commands::cmd_stats(&config)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
        Command::Split => {
            let s = commands::cmd_split(&config)?;
            println!("{} users held out across {} folds", s.held_out.len(), s.plan.k);
        }
        Command::Run => {
            let s = commands::cmd_run(&config)?;
            for r in &s.reports {
                println!("{}\t{}\t{:.4}\t[{:.4}, {:.4}]", r.model, r.metric, r.mean, r.ci.lo, r.ci.hi);
            }
        }
        Command::Compare { report_a, report_b, alpha } => {
            if let Some(a) = alpha {
                config.stats.alpha = a;
            }
            let c = commands::cmd_compare(&config, &report_a, &report_b)?;
            println!("{}", serde_json::to_string_pretty(&c)?);
        }
        Command::Simulate => {
            let t = commands::cmd_simulate(&config)?;
            t.write_csv(std::io::stdout().lock())?;
        }
        Command::Trace => {
            let t = commands::cmd_trace(&config)?;
            for (trace, curve) in t.traces.iter().zip(&t.normalized) {
                let last = curve.iter().rev().find_map(|v| *v).unwrap_or(f64::NAN);
                println!("{}\t{}\t{} trials\t{last:.4}", t.family, trace.strategy, trace.trials.len());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
