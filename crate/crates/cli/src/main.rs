use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod error;
mod svg;

use config::Overrides;
use error::CliError;

/// Silver-mean model sets: generation, deformation and diffraction.
#[derive(Parser, Debug)]
#[command(name = "quasilattice", version)]
struct Cli {
    /// JSON run configuration; flags override its fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Patch radius R (points in [-R, R])
    #[arg(long, global = true)]
    radius: Option<f64>,

    /// Affine deformation slope, e.g. 0.5 or 3-2*sqrt2
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<String>,

    /// Affine deformation offset
    #[arg(long, global = true, allow_hyphen_values = true)]
    beta: Option<String>,

    /// Largest |k| scanned
    #[arg(long = "kmax", global = true)]
    k_max: Option<f64>,

    /// Drop peaks with intensity below this value
    #[arg(long, global = true)]
    floor: Option<f64>,

    /// Write a stem plot of the analytic spectrum to this file
    #[arg(long, global = true)]
    svg: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Accept deformations that fail the Delone check
    #[arg(long, global = true)]
    allow_overlap: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Projection,
    Substitution,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a patch CSV and a JSON summary
    Generate {
        #[arg(long, value_enum, default_value_t = Mode::Projection)]
        mode: Mode,
    },
    /// Solve the window IFS and verify the exact candidate
    Windows,
    /// Deform a patch and check admissibility
    Deform,
    /// Analytic and empirical spectra with comparison table
    Diffract,
    /// Estimate the internal coordinate of a translate of the set
    Sigma {
        /// Translation x in Z[sqrt2], e.g. 1+sqrt2
        #[arg(long, allow_hyphen_values = true, default_value = "0")]
        shift: String,
    },
    /// Exact systematic extinctions for an exact alpha
    Extinctions,
    /// Weyl sums against analytic amplitudes
    Compare,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("QUASILATTICE_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("QUASILATTICE_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let flags = Overrides {
        radius: cli.radius,
        alpha: cli.alpha,
        beta: cli.beta,
        k_max: cli.k_max,
        floor: cli.floor,
        svg: cli.svg,
        out: cli.out,
        allow_overlap: cli.allow_overlap,
    };
    let run = config::load(cli.config.as_deref())?.resolve(flags)?;
    match cli.command {
        Command::Generate { mode } => commands::generate(&run, mode),
        Command::Windows => commands::windows(&run),
        Command::Deform => commands::deform(&run),
        Command::Diffract => commands::diffract(&run),
        Command::Sigma { shift } => commands::sigma(&run, &shift),
        Command::Extinctions => commands::extinctions(&run),
        Command::Compare => commands::compare(&run),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("quasilattice: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
