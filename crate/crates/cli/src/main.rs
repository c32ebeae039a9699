//! `delaystab` command-line front end.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "delaystab",
    version,
    about = "Delay-induced stabilization of the 1-D wave equation"
)]
pub struct Cli {
    /// Output directory (falls back to the config file, then DELAYSTAB_OUT).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed recorded in the manifest for randomized harnesses.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress console summaries.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct ModeArgs {
    /// Mode number.
    #[arg(long, default_value_t = 1)]
    pub n: u32,
    /// Dimensionless string length.
    #[arg(long, default_value_t = 1.0)]
    pub ell: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roots of the modal quasipolynomial and its spectral abscissa.
    Analyze {
        #[command(flatten)]
        mode: ModeArgs,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        re_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        re_max: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        im_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        im_max: Option<f64>,
        #[arg(long, default_value_t = delaystab::quasipoly::DEFAULT_GRID_DENSITY)]
        grid_density: usize,
    },
    /// Stabilizing gain intervals for one delay or a delay sweep.
    Design {
        #[command(flatten)]
        mode: ModeArgs,
        #[arg(long, conflicts_with_all = ["tau_min", "tau_max", "tau_step"])]
        tau: Option<f64>,
        /// Gain to certify (single-delay mode).
        #[arg(long, requires = "tau", allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, requires_all = ["tau_max", "tau_step"])]
        tau_min: Option<f64>,
        #[arg(long)]
        tau_max: Option<f64>,
        #[arg(long)]
        tau_step: Option<f64>,
    },
    /// Right-half-plane root counts over the scaled parameter plane.
    Region {
        #[arg(long, allow_hyphen_values = true)]
        beta_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        beta_max: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        alpha_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        alpha_max: Option<f64>,
        #[arg(long, default_value_t = 200)]
        resolution: usize,
        /// Evaluate cells on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Finite-difference simulation from a JSON run configuration.
    Simulate { config: PathBuf },
    /// Modal delay-ODE trace used as an oracle for `simulate`.
    Oracle {
        #[command(flatten)]
        mode: ModeArgs,
        #[arg(long)]
        tau: f64,
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        zeta0: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        zeta1: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long)]
        t_final: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
