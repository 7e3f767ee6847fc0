//! `omnimorph`: batch front-end for the actuation analyses and the
//! closed-loop simulator.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 the simulation
//! diverged or the controller faulted, 1 anything else (I/O).

mod analysis;
mod output;
mod sim;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "omnimorph", version, about = "Morphing multirotor analysis and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct OutArgs {
    /// Output directory (overrides OMNIMORPH_OUT)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rank of the full allocation matrix and actuation class per tilt
    Analyze {
        /// Comma-separated tilt angles in degrees
        #[arg(long, value_delimiter = ',', conflicts_with = "sweep")]
        alpha: Vec<String>,
        /// start:step:end in degrees, emitted as CSV
        #[arg(long)]
        sweep: Option<String>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Break-even tilting-mechanism mass fraction versus fixed tilt
    Deltam {
        /// start:step:end in degrees
        #[arg(long, default_value = "0:1:60")]
        range: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Support values of the feasible force set and inscribed radii
    Forceset {
        /// Comma-separated tilt angles in degrees
        #[arg(long, value_delimiter = ',', conflicts_with = "sweep")]
        alpha: Vec<String>,
        /// start:step:end in degrees; prints the radius per tilt and the
        /// omnidirectional interval
        #[arg(long)]
        sweep: Option<String>,
        /// Number of sampled directions
        #[arg(long, default_value_t = 400)]
        dirs: usize,
        /// Drop the zero-torque constraint (raw force polytope)
        #[arg(long)]
        no_zero_torque: bool,
        /// Worker threads
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Minimum-norm hover input and its shaft power
    Hover {
        /// Tilt in degrees
        #[arg(long)]
        alpha: f64,
        /// Mass in kg (defaults to the platform mass)
        #[arg(long)]
        mass: Option<f64>,
    },
    /// Run closed-loop simulations and write their traces
    Simulate {
        /// Scenario files (TOML) or preset names (case-a, case-b)
        #[arg(default_value = "case-a")]
        configs: Vec<String>,
        #[command(flatten)]
        overrides: sim::Overrides,
        /// Scenarios run in parallel
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run two scenarios and print their summaries side by side
    Compare {
        a: String,
        b: String,
        #[command(flatten)]
        overrides: sim::Overrides,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
    Other(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 3,
            Failure::Other(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) | Failure::Other(m) => m,
        }
    }
}

impl From<omnimorph_core::Error> for Failure {
    fn from(e: omnimorph_core::Error) -> Self {
        use omnimorph_core::Error as E;
        match e {
            ref err if err.is_runtime_fault() => Failure::Runtime(err.to_string()),
            E::Io(_) | E::Csv(_) => Failure::Other(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze { alpha, sweep, out } => analysis::analyze(&alpha, sweep.as_deref(), &out),
        Command::Deltam { range, out } => analysis::deltam(&range, &out),
        Command::Forceset {
            alpha,
            sweep,
            dirs,
            no_zero_torque,
            jobs,
            out,
        } => analysis::forceset(&alpha, sweep.as_deref(), dirs, !no_zero_torque, jobs, &out),
        Command::Hover { alpha, mass } => analysis::hover(alpha, mass),
        Command::Simulate {
            configs,
            overrides,
            jobs,
            out,
        } => sim::simulate(&configs, &overrides, jobs, &out),
        Command::Compare { a, b, overrides, out } => sim::compare(&a, &b, &overrides, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
