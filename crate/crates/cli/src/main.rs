use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eepn_lab::config::Config;

#[derive(Parser)]
#[command(
    name = "eepn-lab",
    version,
    about = "Coherent-link EEPN simulation and distortion-model validation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the transmission simulation and write blockwise metrics.
    Simulate {
        /// Run configuration (`key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for the run artifacts.
        #[arg(long)]
        out: PathBuf,
        /// Replay a prepared LO phase trace instead of drawing one.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Evaluate the distortion-power models on a phase trace.
    Predict {
        #[arg(long)]
        config: PathBuf,
        /// Phase trace to model (e.g. `phase_trace.txt` from a simulate run).
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Correlate two block-series CSV files on the same grid.
    Compare {
        series_a: PathBuf,
        series_b: PathBuf,
        /// Where to write the report and histograms.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Detrend a recorded phase trace and resample it to a target rate.
    PrepTrace {
        /// Raw recorded trace.
        #[arg(long)]
        trace: PathBuf,
        /// Polynomial degree removed before use.
        #[arg(long, default_value_t = 5)]
        degree: usize,
        /// Target sample rate in Hz.
        #[arg(long)]
        rate: f64,
        /// Output trace file.
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Simulate { config, out, trace } => {
            let cfg = Config::from_file(&config)?;
            let lo = match &trace {
                Some(path) => Some(eepn_core::channel::load_phase_trace(path)?),
                None => None,
            };
            let result = eepn_lab::run_simulate(&cfg, lo.as_ref(), &out)?;
            println!(
                "simulate: {} blocks, mean SNR {:.3} dB -> {}",
                result.sigma2.len(),
                result.mean_snr_db,
                out.display()
            );
        }
        Command::Predict { config, trace, out } => {
            let cfg = Config::from_file(&config)?;
            let result = eepn_lab::run_predict(&cfg, &trace, &out)?;
            println!(
                "predict: {} blocks, mean temporal prediction {:.6e} -> {}",
                result.temporal.len(),
                result.temporal.mean(),
                out.display()
            );
        }
        Command::Compare {
            series_a,
            series_b,
            out,
        } => {
            let report = eepn_lab::run_compare(&series_a, &series_b, &out)?;
            print!("{}", report.render());
        }
        Command::PrepTrace {
            trace,
            degree,
            rate,
            out,
        } => {
            eepn_lab::run_prep_trace(&trace, degree, rate, &out)?;
            println!("prep-trace: wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
