//! `yamabe`: conformal Laplacian experiments driven by a TOML configuration.
//!
//! Each verb writes CSV artifacts into the output directory. Failures write
//! `error.json` there, print the same record to stderr and exit non-zero.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Config, Overrides};
use error::{CliError, CliResult, EXIT_CONFIG};
use output::Output;

#[derive(Debug, Parser)]
#[command(name = "yamabe", version, about = "Spectra of the conformal Laplacian on discretized tori and model products")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "YAMABE_OUT", default_value = "out")]
    out: PathBuf,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Forces the dense eigensolver.
    #[arg(long, global = true)]
    dense: bool,

    /// Worker threads; all cores when absent.
    #[arg(long, global = true, env = "YAMABE_THREADS")]
    threads: Option<usize>,

    /// Overrides the kernel tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Lowest eigenvalues, sign counts and kernel.
    Spectrum,
    /// Eigenvalue velocities along a metric direction.
    Perturb,
    /// Deform the metric until the kernel is empty.
    BreakKernel,
    /// Negative counts and precompactness for model products.
    Product,
    /// Scalar curvature and identity residuals.
    CurvatureCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Perturb => "perturb",
            Command::BreakKernel => "break-kernel",
            Command::Product => "product",
            Command::CurvatureCheck => "curvature-check",
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))?;
    }
    let overrides = Overrides { seed: cli.seed, dense: cli.dense, tol: cli.tol };
    let cfg = match &cli.config {
        Some(path) => Config::load(path, &overrides)?,
        None => Config::parse("", &overrides)?,
    };
    let out = Output::new(&cli.out, &cfg)?;
    match cli.command {
        Command::Spectrum => commands::spectrum::run(&cfg, &out),
        Command::Perturb => commands::perturb::run(&cfg, &out),
        Command::BreakKernel => commands::break_kernel::run(&cfg, &out),
        Command::Product => commands::product::run(&cfg, &out),
        Command::CurvatureCheck => commands::curvature::run(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = e.record(cli.command.name());
            let json = serde_json::to_string_pretty(&record).expect("error record serializes");
            if std::fs::create_dir_all(&cli.out).is_ok() {
                let _ = std::fs::write(cli.out.join("error.json"), &json);
            }
            eprintln!("{json}");
            let code = u8::try_from(record.exit_code).unwrap_or(EXIT_CONFIG as u8);
            ExitCode::from(code)
        }
    }
}
