mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Exit codes: 0 success, 1 validation error, 2 runtime failure,
/// 3 property failure.
pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;
pub const EXIT_PROPERTY: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "quantrelax",
    about = "Train models with quantized weights via relaxed two-phase optimization",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute a single training run from a JSON config.
    Run {
        /// Path to the run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override a config field, e.g. --set optimizer=binaryrelax or
        /// --set relax.rho=1.02. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory (falls back to config out_dir, then
        /// $QUANTRELAX_OUT, then the current directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run an optimizer x seed cross product and tabulate final metrics.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated optimizer list, e.g. binaryconnect,binaryrelax.
        #[arg(long, value_delimiter = ',', required = true)]
        optimizers: Vec<String>,
        /// Comma-separated seed list.
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for concurrent runs (0 = rayon default).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Quantize a vector read from a file and report the factorization.
    Quantize {
        /// File of whitespace/comma-separated reals.
        vector_file: PathBuf,
        /// Solver: binary | ternary-exact | ternary-threshold | lloyd.
        #[arg(long, default_value = "binary")]
        solver: String,
        /// Levels for the lloyd solver, e.g. 0,1,2,3.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        /// Lloyd iteration cap.
        #[arg(long, default_value_t = 1)]
        max_iters: usize,
        /// Cross-check against the brute-force oracle (small inputs only).
        #[arg(long)]
        oracle: bool,
        /// Print the full code vector.
        #[arg(long)]
        codes: bool,
    },
    /// Run the fast property-check subset and report pass/fail per check.
    Verify {
        /// Only run checks whose name contains this substring.
        #[arg(long)]
        filter: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            config,
            overrides,
            out,
            seed,
        } => commands::run::execute(&config, &overrides, out.as_deref(), seed),
        Command::Compare {
            config,
            optimizers,
            seeds,
            overrides,
            out,
            jobs,
        } => commands::compare::execute(
            &config,
            &optimizers,
            &seeds,
            &overrides,
            out.as_deref(),
            jobs,
        ),
        Command::Quantize {
            vector_file,
            solver,
            levels,
            max_iters,
            oracle,
            codes,
        } => commands::quantize::execute(
            &vector_file,
            &solver,
            levels.as_deref(),
            max_iters,
            oracle,
            codes,
        ),
        Command::Verify { filter } => commands::verify::execute(filter.as_deref()),
    };
    ExitCode::from(code)
}
