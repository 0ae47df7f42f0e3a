//! `gmin`: solve, report and verify the tail asymptotics of the minimum of
//! a smooth Gaussian process on an interval.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gmin::Family;

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "gmin", version, about = "Tail asymptotics of the minimum of a smooth Gaussian process")]
struct Cli {
    /// JSON run configuration (defaults to the Gaussian kernel on [0, 1]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files; without it results go to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed for all Monte Carlo stages.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Treat low effective-sample-size warnings as failures.
    #[arg(long, global = true)]
    strict: bool,
    /// Levels u, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    u: Option<Vec<f64>>,
    /// Monte Carlo sample size.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Grid size of the measure solver.
    #[arg(long, global = true)]
    grid_n: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal measure, support and V*.
    Solve,
    /// θ, E(W), the leading constant and the tail at the requested levels.
    Asym,
    /// Importance-sampling check of the tail and the conditional laws.
    Verify,
    /// μ on 2001 points as CSV.
    MuPlot,
    /// Support-transition breakpoints c1 and c2 of a kernel family.
    Breakpoints {
        #[arg(long, value_enum, default_value = "gaussian")]
        family: FamilyArg,
    },
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum FamilyArg {
    Gaussian,
    Sinc,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Sinc => Family::Sinc,
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("GM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("GM_THREADS must be a positive integer, got {v:?}"))?;
        if n == 0 {
            anyhow::bail!("GM_THREADS must be a positive integer, got 0");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.asymptotics.seed = seed;
        cfg.verify.seed = seed;
    }
    if let Some(u) = &cli.u {
        cfg.asymptotics.u = u.clone();
        cfg.verify.u = u.clone();
    }
    if let Some(n) = cli.n {
        cfg.verify.n = n;
    }
    if let Some(g) = cli.grid_n {
        cfg.solver.grid_n = g;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    configure_threads()?;
    if let Command::Breakpoints { family } = cli.command {
        return commands::breakpoints(family.into(), cli.out.as_deref());
    }
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Solve => commands::solve(&cfg),
        Command::Asym => commands::asym(&cfg),
        Command::Verify => commands::verify(&cfg, cli.strict),
        Command::MuPlot => commands::mu_plot(&cfg),
        Command::Breakpoints { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
