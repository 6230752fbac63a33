mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rlsfi::Error;

use config::CommonArgs;

/// Robust least-squares frequency-invariant beamformer design and
/// evaluation.
#[derive(Debug, Parser)]
#[command(name = "rlsfi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design per-bin weights and FIR filters; writes design.json,
    /// filters.json, diagnostics.csv and desired.csv
    Design,
    /// Beampattern, WNG and DI of a design; writes beampattern.csv, wng.csv
    /// and di.csv
    Analyze {
        /// Design manifest
        #[arg(long)]
        design: PathBuf,
        /// Filter manifest (defaults to the one recorded in the design)
        #[arg(long)]
        filters: Option<PathBuf>,
    },
    /// Filter-and-sum a multichannel WAV file into a mono WAV file
    Apply {
        /// Filter manifest
        #[arg(long)]
        filters: PathBuf,
        /// Multichannel input WAV
        #[arg(long)]
        input: PathBuf,
        /// Output WAV (default: <out>/output.wav)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render a scene file to mix.wav and one stem WAV per source
    Synth {
        /// Scene file (JSON)
        #[arg(long)]
        scene: Option<PathBuf>,
    },
    /// Two-talker evaluation over the scenario matrix; writes report.csv and
    /// summary.csv
    Eval,
    /// Describe a uniform direction grid
    GridInfo {
        #[arg(long)]
        az_step: Option<f64>,
        #[arg(long)]
        el_step: Option<f64>,
        /// Leave out the two poles
        #[arg(long)]
        no_poles: bool,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::InvalidArgument(_) => 2,
        Error::Format { .. } | Error::Io { .. } => 3,
        Error::Numerical(_) | Error::Infeasible { .. } => 4,
        Error::AtBin { .. } => unreachable!("root looks through bin wrappers"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Design => commands::design(&cli.common),
        Command::Analyze { design, filters } => {
            commands::analyze(&cli.common, &design, filters.as_deref())
        }
        Command::Apply {
            filters,
            input,
            output,
        } => commands::apply(&cli.common, &filters, &input, output.as_deref()),
        Command::Synth { scene } => commands::synth(&cli.common, scene.as_deref()),
        Command::Eval => commands::eval(&cli.common),
        Command::GridInfo {
            az_step,
            el_step,
            no_poles,
        } => commands::grid_info(&cli.common, az_step, el_step, !no_poles),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
