//! `finsler-sobolev <command> --config <path> [--out <dir>] [--seed <int>]`
//!
//! Exit status: 0 when the run's verdict holds (or it has none), 2 when it
//! does not, 1 on any error. Thread count comes from `RAYON_NUM_THREADS`.

mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use finsler_sobolev::config::load_config;
use finsler_sobolev::Command;

#[derive(Parser, Debug)]
#[command(
    name = "finsler-sobolev",
    version,
    about = "Finsler densities, distances and Sobolev approximation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed; overrides `analysis.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Convexity, reversibility and fundamental tensor at a point.
    MetricInfo(Common),
    /// Indicatrix volume, density and osculating metric at a point.
    Moments(Common),
    /// Forward distance field from a source node.
    Distance(Common),
    /// H_k^p norm of a field.
    Norms(Common),
    /// Interior or half-ball density pipeline.
    Approximate(Common),
    /// Weak Poisson problem on a closed surface.
    Dirichlet(Common),
    /// Smoothed-step obstruction harness.
    Counterexample(Common),
}

impl Sub {
    fn split(self) -> (Command, Common) {
        match self {
            Sub::MetricInfo(c) => (Command::MetricInfo, c),
            Sub::Moments(c) => (Command::Moments, c),
            Sub::Distance(c) => (Command::Distance, c),
            Sub::Norms(c) => (Command::Norms, c),
            Sub::Approximate(c) => (Command::Approximate, c),
            Sub::Dirichlet(c) => (Command::Dirichlet, c),
            Sub::Counterexample(c) => (Command::Counterexample, c),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (command, common) = cli.command.split();
    let outcome = load_config(&common.config).and_then(|mut config| {
        if config.command != command {
            return Err(finsler_sobolev::Error::Config(format!(
                "config is for `{}` but `{}` was requested",
                config.command.name(),
                command.name()
            )));
        }
        if let Some(seed) = common.seed {
            config.analysis.seed = Some(seed);
        }
        let out = common.out.clone().unwrap_or_else(|| config.output_dir());
        run::execute(&config, &out)
    });
    match outcome {
        Ok(verdict) => {
            if verdict == Some(false) {
                println!("verdict: false");
                ExitCode::from(2)
            } else {
                if let Some(v) = verdict {
                    println!("verdict: {v}");
                }
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
