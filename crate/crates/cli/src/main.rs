//! Command-line interface for optimal and minimax-robust filtering of
//! periodically correlated processes.
//!
//! Exit codes: 0 success, 1 domain error (infeasible class, non-positive
//! density, broken factorization), 2 verification failure, 3 I/O or parse
//! error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ProblemConfig;

#[derive(Parser)]
#[command(
    name = "pcfilter",
    about = "Optimal and minimax-robust filtering for periodically correlated processes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Problem description, a flat `key = value` text file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Machine-readable reports: bare `key=value` lines, no comments.
    #[arg(long)]
    json_like: bool,
    /// Override the config's RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the factorization residual tolerance (default 1e-10).
    #[arg(long)]
    tol_factor: Option<f64>,
    /// Override the factorization iteration cap (default 200).
    #[arg(long)]
    max_iter: Option<usize>,
    /// Override the positivity threshold for densities (default 1e-10).
    #[arg(long)]
    eps_pd: Option<f64>,
    /// Override the Lagrange stationarity gate (default 1e-6).
    #[arg(long)]
    stationarity_tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Canonical spectral factorization of a density.
    Factorize(RunArgs),
    /// Optimal filter characteristic and mean-square error.
    Filter(RunArgs),
    /// Least favorable densities and minimax characteristic.
    Minimax(RunArgs),
    /// Draw moving-average sample paths.
    Simulate(RunArgs),
    /// Cross-validate formulas against normal equations and Monte Carlo.
    Verify(RunArgs),
}

impl Command {
    fn args(&self) -> &RunArgs {
        match self {
            Command::Factorize(a)
            | Command::Filter(a)
            | Command::Minimax(a)
            | Command::Simulate(a)
            | Command::Verify(a) => a,
        }
    }
}

fn apply_overrides(cfg: &mut ProblemConfig, args: &RunArgs) {
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(tol) = args.tol_factor {
        cfg.factorize.tol = tol;
    }
    if let Some(iters) = args.max_iter {
        cfg.factorize.max_iter = iters;
    }
    if let Some(eps) = args.eps_pd {
        cfg.factorize.eps_pd = eps;
    }
    if let Some(tol) = args.stationarity_tol {
        cfg.stationarity_tol = tol;
    }
}

fn run(cli: &Cli) -> pcfilter::Result<commands::RunOutput> {
    let args = cli.command.args();
    let mut cfg = ProblemConfig::load(&args.config)?;
    apply_overrides(&mut cfg, args);
    let out = commands::output_dir(&cfg, args.out.as_ref(), &args.config);
    match &cli.command {
        Command::Factorize(_) => commands::run_factorize(&cfg, &out, args.json_like),
        Command::Filter(_) => commands::run_filter(&cfg, &out, args.json_like),
        Command::Minimax(_) => commands::run_minimax(&cfg, &out, args.json_like),
        Command::Simulate(_) => commands::run_simulate(&cfg, &out, args.json_like),
        Command::Verify(_) => commands::run_verify(&cfg, &out, args.json_like),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not errors
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(output) => {
            let machine = cli.command.args().json_like;
            print!(
                "{}",
                pcfilter::textio::report_to_string(&output.entries, machine)
            );
            if output.verified {
                ExitCode::SUCCESS
            } else {
                eprintln!("verification failed");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io_or_parse() {
                ExitCode::from(3)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
