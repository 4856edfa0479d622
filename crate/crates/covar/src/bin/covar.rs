//! Thin command-line front end; all logic lives in the library.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use covar::cli::{self, Command, RunOptions};
use covar::wellposedness::Property;

#[derive(Parser)]
#[command(
    name = "covar",
    about = "Well-posedness certification for stochastic constraint and variational systems"
)]
struct Args {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Clone, Copy, ValueEnum)]
enum PropertyArg {
    Lipschitz,
    MetricRegularity,
}

#[derive(Subcommand)]
enum Sub {
    /// Assemble and print the coderivative upper estimate.
    Analyze {
        file: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Certify a well-posedness property.
    Certify {
        file: PathBuf,
        #[arg(long, value_enum)]
        property: PropertyArg,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the brute-force empirical estimators on the solution map.
    Estimate {
        file: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate the MPEC stationarity residual at the base point.
    CheckMpec {
        file: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Points per axis for sampling oracles.
    #[arg(long)]
    grid: Option<usize>,
    /// Sampling radius around the base point.
    #[arg(long)]
    radius: Option<f64>,
    /// Seed override for all pseudorandom sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Emit the machine-readable JSON report on stdout.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    cli::configure_threads();
    let args = Args::parse();
    let (file, command, property, common) = match args.command {
        Sub::Analyze { file, common } => (file, Command::Analyze, None, common),
        Sub::Certify { file, property, common } => (
            file,
            Command::Certify,
            Some(match property {
                PropertyArg::Lipschitz => Property::LipschitzLike,
                PropertyArg::MetricRegularity => Property::MetricRegularity,
            }),
            common,
        ),
        Sub::Estimate { file, common } => (file, Command::Estimate, None, common),
        Sub::CheckMpec { file, common } => (file, Command::CheckMpec, None, common),
    };
    let text = match std::fs::read_to_string(&file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return ExitCode::from(1);
        }
    };
    let start = Instant::now();
    let opts = RunOptions {
        command,
        property,
        grid: common.grid,
        radius: common.radius,
        seed: common.seed,
    };
    let (report, code) = cli::run(&text, &opts);
    if common.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_text(Some(start.elapsed().as_millis())));
    }
    ExitCode::from(code as u8)
}
