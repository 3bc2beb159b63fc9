use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nakano_lab::cli::{self, ExperimentConfig, Pipeline};

#[derive(Parser)]
#[command(name = "nakano-lab", version, about = "Numerical checks of weighted L2 estimates for dbar on hermitian bundles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the CSV report and artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Algebraic and differential identities, adjoint exactness, basic estimate.
    Identities(Common),
    /// Griffiths and Nakano constants and the separating witness.
    Positivity(Common),
    /// Minimal-norm solves against the weighted bound.
    Solve(Common),
    /// Regularized solve for a singular catalog metric.
    Regularize(Common),
    /// Identity residuals across resolutions.
    Convergence(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (pipeline, common) = match cli.command {
        Command::Identities(c) => (Pipeline::Identities, c),
        Command::Positivity(c) => (Pipeline::Positivity, c),
        Command::Solve(c) => (Pipeline::Solve, c),
        Command::Regularize(c) => (Pipeline::Regularize, c),
        Command::Convergence(c) => (Pipeline::Convergence, c),
    };
    let result = ExperimentConfig::from_path(&common.config).and_then(|mut cfg| {
        if let Some(seed) = common.seed {
            cfg.seed = seed;
        }
        cli::run(pipeline, &cfg, &common.out)
    });
    match &result {
        Ok(outcome) => {
            let total = outcome.report.rows.len();
            let failed: Vec<_> = outcome.report.failures().collect();
            for r in &failed {
                eprintln!(
                    "FAIL {} [{}] n={} N={} p={}: value {:e} vs threshold {:e} {}",
                    r.check, r.anchor, r.n, r.samples, r.p, r.value, r.threshold, r.detail
                );
            }
            println!("{}: {} of {} checks passed, report in {}", pipeline.name(), total - failed.len(), total, common.out.display());
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(cli::exit_code(&result) as u8)
}
