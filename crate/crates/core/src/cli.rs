//! Command-line interface. Exit codes: 0 success, 1 invalid input or
//! usage, 2 file I/O failure.

use std::ffi::OsString;
use std::path::PathBuf;

use chrono::NaiveDate;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigOverrides, RunConfig};
use crate::exec::Execution;
use crate::forecast::ForecastMode;
use crate::pipeline::{self, PipelineError, SimulationPlan};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "volrisk",
    version,
    about = "Volume-implied prices of risk and trader aggregation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rolling estimates, normality tests, risk metrics, segment summaries
    /// and forecasts for a price/volume series.
    Analyze(RunArgs),
    /// One-day-ahead forecasts only.
    Forecast(RunArgs),
    /// Trader-population Monte Carlo from a spec file.
    Simulate(SimulateArgs),
    /// Print the version.
    Version,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// `key = value` configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV with date, close and volume columns.
    #[arg(long)]
    pub prices: Option<PathBuf>,
    /// CSV with date and yield columns.
    #[arg(long)]
    pub rates: Option<PathBuf>,
    /// Estimation window in trading days.
    #[arg(long)]
    pub window: Option<usize>,
    /// Force the price/volume correlation to zero in the metrics.
    #[arg(long)]
    pub rho_zero: bool,
    /// Segment breakpoints, comma-separated ISO dates.
    #[arg(long, value_delimiter = ',')]
    pub segments: Option<Vec<NaiveDate>>,
    /// Yields are in percent.
    #[arg(long)]
    pub yield_percent: bool,
    /// Forecast mode.
    #[arg(long, value_parser = ["reconstruction", "point"])]
    pub mode: Option<String>,
    /// Accepted for config symmetry; analysis itself draws no random numbers.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Spec file.
    pub spec: PathBuf,
    /// Overrides the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

fn resolve(args: &RunArgs) -> Result<RunConfig, PipelineError> {
    let file = args
        .config
        .as_deref()
        .map(pipeline::read_kv_file)
        .transpose()?;
    let flags = ConfigOverrides {
        price_volume_path: args.prices.clone(),
        risk_free_path: args.rates.clone(),
        window: args.window,
        annualization: None,
        rho_zero: args.rho_zero,
        segments: args.segments.clone(),
        output_dir: args.out.clone(),
        seed: args.seed,
        yield_percent: args.yield_percent,
        forecast_mode: args
            .mode
            .as_deref()
            .map(|m| m.parse::<ForecastMode>().expect("checked by clap")),
    };
    Ok(RunConfig::resolve(file.as_ref(), &flags)?)
}

fn execute(command: Command) -> Result<(), PipelineError> {
    let exec = Execution::default();
    match command {
        Command::Analyze(args) => {
            let cfg = resolve(&args)?;
            for path in pipeline::run_analyze(&cfg, exec)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Forecast(args) => {
            let cfg = resolve(&args)?;
            let d = pipeline::run_forecast(&cfg, exec)?;
            println!("wrote {}", cfg.output_dir.join("forecast.csv").display());
            println!(
                "mae_rel={} rmse_rel={} hit_rate={}",
                d.mae_rel, d.rmse_rel, d.hit_rate
            );
        }
        Command::Simulate(args) => {
            let mut plan = SimulationPlan::from_kv(&pipeline::read_kv_file(&args.spec)?)?;
            if let Some(seed) = args.seed {
                plan.spec.seed = seed;
            }
            let out = pipeline::run_simulate(&plan, &args.out, exec)?;
            if let Some(paths) = &out.paths {
                if paths.resampled > 0 {
                    eprintln!(
                        "warning: {} risk-aversion draws equal to 1 were redrawn",
                        paths.resampled
                    );
                }
                let infeasible = paths.paths.iter().filter(|p| !p.feasible).count();
                if infeasible > 0 {
                    eprintln!("warning: {infeasible} wealth paths hit zero and were truncated");
                }
            }
            println!("wrote simulation tables to {}", args.out.display());
        }
        Command::Version => println!("volrisk {}", env!("CARGO_PKG_VERSION")),
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_VALIDATION,
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                EXIT_IO
            } else {
                EXIT_VALIDATION
            }
        }
    }
}
