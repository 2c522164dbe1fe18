mod error;
mod format;
mod instance;
mod method;
mod solve;
mod sweep;
mod thresholds;
mod verify;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use senscomm_core::SolverConfig;

use crate::error::{CliError, CliResult};
use crate::method::Method;
use crate::sweep::{Param, SweepSpec};

/// Sensing-fraction, rate and power allocation for parallel Gaussian sources.
#[derive(Debug, Parser)]
#[command(name = "senscomm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Lower bound on every sampling fraction in the numerical solver.
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    /// Relative stopping tolerance of the numerical solver.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

impl SolverArgs {
    fn config(&self) -> CliResult<SolverConfig> {
        let config = SolverConfig {
            delta: self.delta,
            tolerance: self.tol,
            ..SolverConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one instance and print the allocation.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        /// ordered, general, lcf, esf (separate); general, zero-cost, large-budget (joint).
        #[arg(long, default_value = "general")]
        method: Method,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Sweep one budget and write one CSV row per value and method.
    Sweep {
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated or repeated.
        #[arg(long, value_delimiter = ',', required = true)]
        method: Vec<Method>,
        #[arg(long, value_enum)]
        param: Param,
        #[arg(long, allow_negative_numbers = true)]
        from: f64,
        #[arg(long, allow_negative_numbers = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Print the budget thresholds of an ordered instance.
    Thresholds {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
    },
    /// Cross-check the solvers on an instance; exit 1 if any check fails.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        /// Points per grid axis of the exhaustive oracle.
        #[arg(long, default_value_t = 101)]
        grid: usize,
        /// Also certify an allocation read from this JSON file.
        #[arg(long)]
        allocation: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Solve {
            instance,
            method,
            format,
            solver,
        } => {
            let instance = instance::load(&instance)?;
            let text = solve::run(&instance, method, &solver.config()?, format)?;
            stdout.write_all(text.as_bytes())?;
        }
        Command::Sweep {
            instance,
            method,
            param,
            from,
            to,
            steps,
            out,
            solver,
        } => {
            let instance = instance::load(&instance)?;
            let spec = SweepSpec {
                param,
                from,
                to,
                steps,
                methods: method,
            };
            let csv = sweep::render(&instance, &spec, &solver.config()?)?;
            match out {
                Some(path) => sweep::write(&path, &csv)?,
                None => stdout.write_all(csv.as_bytes())?,
            }
        }
        Command::Thresholds { instance, format } => {
            let instance = instance::load(&instance)?;
            stdout.write_all(thresholds::run(&instance, format)?.as_bytes())?;
        }
        Command::Verify {
            instance,
            grid,
            allocation,
            solver,
        } => {
            let instance = instance::load(&instance)?;
            let report = verify::run(&instance, grid, allocation.as_deref(), &solver.config()?)?;
            stdout.write_all(report.as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Verification(report)) => {
            println!("{report}");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
