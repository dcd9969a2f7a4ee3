//! `varlap`: solve, sample the geometry, check potentials and sweep the
//! modular-space inequalities from a TOML problem file.
//!
//! Exit codes: 0 success, 1 a check or certificate failed, 2 bad input.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "varlap", version, about = "p(x)-Laplacian inclusions with nonsmooth potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Find a critical point and certify the inclusion.
    Solve(SolveArgs),
    /// Sample R on spheres of radius ρ and locate the mountain-pass endpoint.
    Geometry(GeometryArgs),
    /// Run every potential checker whose parameters are declared.
    CheckPotential(CheckArgs),
    /// Randomized sweep of the modular, Hölder, Poincaré and monotonicity relations.
    VerifyLemmas(LemmaArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RouteArg {
    Mp,
    Min,
}

#[derive(Args, Debug)]
struct Common {
    /// Problem file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    route: Option<RouteArg>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    path_points: Option<usize>,
    #[arg(long)]
    multistart: Option<usize>,
    #[arg(long)]
    probes: Option<usize>,
    /// Also write the per-iteration history CSV.
    #[arg(long)]
    history: bool,
}

#[derive(Args, Debug)]
struct GeometryArgs {
    #[command(flatten)]
    common: Common,
    /// Radii to sample; defaults to `solver.rho`.
    #[arg(long, value_delimiter = ',')]
    rho: Vec<f64>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct LemmaArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 64)]
    cells: usize,
    /// Exponent on (0, 1) as an expression of x.
    #[arg(long, default_value = "2 + x")]
    exponent: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Geometry(a) => commands::geometry(a),
        Command::CheckPotential(a) => commands::check_potential(a),
        Command::VerifyLemmas(a) => commands::verify_lemmas(a),
    };
    match outcome {
        Ok(commands::Status::Ok) => ExitCode::SUCCESS,
        Ok(commands::Status::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
