use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use pksns::scenarios;
use pksns::{RunConfig, Scenario};

/// Shear-flow suppression of chemotactic blow-up: scenario runner.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Free decay under the frozen linear operator for each amplitude in `A_list`.
    LinearDecay(Common),
    /// 2D blob runs at the configured masses, no fluid.
    TwodCritical(Common),
    /// Full runs over `A_list` and the empirical threshold interval.
    #[command(name = "sweep-A", alias = "sweep-a")]
    SweepA(Common),
    /// One full integration with diagnostics and checkpoints.
    FullRun {
        #[command(flatten)]
        common: Common,
        /// Continue from a checkpoint of an earlier run with the same output directory.
        #[arg(long, value_name = "CHECKPOINT")]
        resume: Option<PathBuf>,
    },
    /// Seeded checks of the elliptic, projection and functional inequalities.
    CheckLemmas(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long, value_name = "DIR")]
    output: Option<PathBuf>,
    /// Worker threads for parallel scenario members.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (scenario, common, resume) = match cli.command {
        Command::LinearDecay(c) => (Scenario::LinearDecay, c, None),
        Command::TwodCritical(c) => (Scenario::TwodCritical, c, None),
        Command::SweepA(c) => (Scenario::SweepA, c, None),
        Command::FullRun { common, resume } => (Scenario::FullRun, common, resume),
        Command::CheckLemmas(c) => (Scenario::CheckLemmas, c, None),
    };
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let text = match &common.config {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let mut cfg = RunConfig::parse_for(&text, scenario).with_context(|| match &common.config {
        Some(p) => format!("in {}", p.display()),
        None => "in the default configuration".into(),
    })?;
    if let Some(out) = common.output {
        cfg.output_dir = out;
    }
    let report = scenarios::run(&cfg, resume.as_deref())?;
    println!("{}", report.summary());
    println!("outputs in {}", cfg.output_dir.display());
    Ok(())
}
