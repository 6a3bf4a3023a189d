//! `cvepr`: EPR and separability criteria for two-mode continuous-variable states.

mod commands;
mod range;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use crate::range::{parse_range, Range};

/// Exit status when at least one criterion is violated.
pub const EXIT_VIOLATION: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "cvepr", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Representation, moments, physicality and PPT diagnostics of a state.
    Describe {
        #[command(flatten)]
        common: Common,
    },
    /// Every criterion on one state. Exits with status 3 on any violation.
    Criteria {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bounds: BoundArgs,
        /// Gain grid for the fixed-gain criteria.
        #[arg(long, value_parser = parse_range, default_value = "1:1:1", allow_hyphen_values = true)]
        gains: Range,
    },
    /// Criteria along a squeezing range (TMSV) or a gain range (given state).
    #[command(group(ArgGroup::new("axis").required(true).args(["r_range", "state"])))]
    Sweep {
        /// Squeezing values of the two-mode squeezed vacuum.
        #[arg(long, value_parser = parse_range, conflicts_with = "state", allow_hyphen_values = true)]
        r_range: Option<Range>,
        /// Use the Fock representation with this cutoff in an r sweep.
        #[arg(long, requires = "r_range")]
        cutoff: Option<usize>,
        /// State for a gain sweep.
        #[arg(long)]
        state: Option<PathBuf>,
        /// Gain values: the sweep axis with --state, the fixed gains with --r-range.
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        gains: Option<Range>,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        bounds: BoundArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Virtual homodyne experiment with bootstrap errors. Exits with status 3
    /// on any violation at three standard errors.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bounds: BoundArgs,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        shots: u64,
        #[arg(long)]
        seed: u64,
        /// Directory for the x- and p-record CSV files.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Wigner-function hidden-variable model of a Gaussian state.
    Lhv {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        bounds: BoundArgs,
        /// Number of hidden-variable states.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        shots: u64,
        #[arg(long)]
        seed: u64,
        /// Attach Gaussian response noise of this width to x and p.
        #[arg(long)]
        smear: Option<f64>,
        /// Write the ensemble as CSV.
        #[arg(long)]
        ensemble: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct Common {
    /// JSON state spec.
    #[arg(long)]
    pub state: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct GridArgs {
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u64).range(16..))]
    pub grid_points: u64,
    #[arg(long, default_value_t = 6.0)]
    pub grid_sigmas: f64,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct BoundArgs {
    /// Uncertainty constant at A.
    #[arg(long = "bound-c", default_value_t = 1.0)]
    pub c: f64,
    /// Uncertainty constant at B.
    #[arg(long = "bound-d", default_value_t = 1.0)]
    pub d: f64,
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(true) => ExitCode::from(EXIT_VIOLATION),
        Ok(false) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
