use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{ConfigError, ConfigLayer, Format, ModelKind};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  comparison finished but some energies fall outside the tolerance
  2  usage error (unknown flag, bad value)
  3  configuration error (unreadable file, bad or conflicting fields)
  4  invalid physical input rejected by the pipeline
  5  numerical failure (minimizer, symmetry, frequencies, Pauli filling)
  6  dense FG oracle disagrees with the reduced eigensolve (--oracle-check)
  7  I/O or data format error

Environment:
  SPT_CACHE_DIR  cache directory; overrides `cache_dir` in the config file";

#[derive(Parser)]
#[command(name = "spt", version)]
#[command(
    about = "Harmonic-order dimensional perturbation theory for trapped two-component fermions"
)]
#[command(after_help = EXIT_CODES)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat key = value config file; flags override its entries
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Interaction model
    #[arg(long, global = true, value_enum)]
    model: Option<ModelKind>,

    /// Harmonic pair coupling (oscillator units)
    #[arg(long, global = true)]
    lambda: Option<f64>,

    /// Square-well range in oscillator lengths
    #[arg(long = "r", global = true, value_name = "R")]
    r: Option<f64>,

    /// Square-well depth parameter (square-well model only)
    #[arg(long, global = true)]
    b: Option<f64>,

    /// Particle number(s): 6, 6..30 (inclusive) or 4,6,8
    #[arg(long, global = true, value_name = "N")]
    n: Option<String>,

    /// Spin-up count, with --n-down, for unbalanced systems
    #[arg(long, global = true)]
    n_up: Option<usize>,

    #[arg(long, global = true)]
    n_down: Option<usize>,

    /// Dimension at which the series is evaluated
    #[arg(long, global = true)]
    dimension: Option<u32>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Write the main output here instead of stdout
    #[arg(short, long, global = true, value_name = "FILE")]
    output: Option<PathBuf>,

    /// Directory for cached building blocks
    #[arg(long, global = true, env = "SPT_CACHE_DIR", value_name = "DIR")]
    cache_dir: Option<PathBuf>,

    /// Validate every reduced eigensolve against the dense FG problem
    #[arg(long, global = true)]
    oracle_check: bool,

    /// More log output (repeat for more)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Value of ħω_ho in the desired output unit; rescales energies
    #[arg(long, global = true)]
    hw: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tune the square well to unitarity at range --r
    Tune,
    /// Locate the symmetric large-D minimum
    Minimize,
    /// Five normal-mode frequencies, multiplicities and v0
    Modes,
    /// Ground-state energy for one particle number
    Energy,
    /// Ground-state energies over a range of particle numbers
    Sweep {
        /// Reference CSV (N, E_ref, sigma, source) to compare against
        #[arg(long, value_name = "CSV")]
        compare: Option<PathBuf>,

        /// Write two-column plot series here
        #[arg(long, value_name = "FILE")]
        plot_data: Option<PathBuf>,
    },
    /// Harmonic-order levels with degeneracies
    Spectrum {
        #[command(flatten)]
        window: Window,
    },
    /// Partition function over a grid of inverse temperatures
    Partition {
        /// Inverse temperatures in 1/ħω_ho, comma separated
        #[arg(long, default_value = "0.5,1,2,5,10", value_delimiter = ',')]
        beta: Vec<f64>,

        #[command(flatten)]
        window: Window,
    },
    /// Extrapolate the unitary energy to zero range
    Extrapolate {
        /// Well ranges, comma separated
        #[arg(
            long,
            default_value = "0.08,0.04,0.02,0.01,0.005",
            value_delimiter = ','
        )]
        ranges: Vec<f64>,

        #[arg(long, value_name = "FILE")]
        plot_data: Option<PathBuf>,
    },
    /// Compare computed energies with reference values
    Compare {
        /// Reference CSV with columns N, E_ref, sigma, source
        #[arg(long, value_name = "CSV")]
        references: PathBuf,

        /// Previously written sweep table (.csv or .json) instead of a new sweep
        #[arg(long, value_name = "FILE")]
        table: Option<PathBuf>,

        /// Absolute tolerance in ħω_ho, added to each sigma
        #[arg(long, default_value_t = 0.3)]
        abs_tol: f64,

        /// Relative tolerance, added to each sigma
        #[arg(long, default_value_t = 0.05)]
        rel_tol: f64,
    },
    /// Inspect or clear the cache directory
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Args, Debug, Clone, Copy)]
struct Window {
    /// Highest level energy in ħω_ho
    #[arg(long, conflicts_with = "window")]
    e_max: Option<f64>,

    /// Energy window above the ground state in ħω_ho
    #[arg(long, default_value_t = 4.0)]
    window: f64,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum CacheAction {
    List,
    Clear,
}

fn resolve(common: &Common, command: &Command) -> Result<config::RunConfig, ConfigError> {
    let file = match &common.config {
        Some(path) => ConfigLayer::load(path)?,
        None => ConfigLayer::default(),
    };
    let flags = ConfigLayer::flags(
        common.model,
        common.lambda,
        common.r,
        common.b,
        common.n.clone(),
        common.n_up,
        common.n_down,
        common.dimension,
        common.format,
        common.output.clone(),
        common.cache_dir.clone(),
        common.oracle_check,
        common.verbose,
        common.hw,
    );
    let mut layer = file.overlay(flags);
    if let Command::Extrapolate { ranges, .. } = command {
        // The range is re-tuned per point; any value selects the model.
        if let Some(&r) = ranges.first() {
            layer = layer.with_default_range(r);
        }
    }
    layer.resolve()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(&cli.common, &cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(commands::EXIT_CONFIG);
        }
    };
    let level = match cfg.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::dispatch(cli.command, cfg) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
