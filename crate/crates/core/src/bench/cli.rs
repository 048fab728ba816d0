//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 on usage or config errors, 2 on numeric or
//! convergence failures.

use super::config;
use super::{artifacts, BenchError, ExperimentConfig, MitigationMode, ParamCache};
use crate::nonherm::exact_reference;
use crate::varopt::IdentityMode;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "spem",
    about = "Structure-preserving error mitigation benchmarks for noisy parameterized circuits",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train circuit parameters for every grid time and save them as JSON
    Train(CommonArgs),
    /// Build the full and readout calibration matrices and export JSON + CSV
    Calibrate(CommonArgs),
    /// Run the configured experiment and write run.csv
    Run(CommonArgs),
    /// Sweep error rate x circuit depth and write sweep.csv
    Sweep(CommonArgs),
    /// Write the exact reference curve to oracle.csv
    Oracle(CommonArgs),
    /// Render a run or sweep CSV as an SVG chart
    Plot(PlotArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Config file path or built-in name (default, noise-sweep,
    /// depth-comparison, device-a, device-b, device-c)
    #[arg(long, default_value = "default")]
    config: String,
    /// Override the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for artifacts and the parameter cache
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// CSV artifact to render (run or sweep format, detected by header)
    #[arg(long)]
    input: PathBuf,
    /// SVG output path (defaults to the input path with .svg)
    #[arg(long)]
    output: Option<PathBuf>,
}

impl CommonArgs {
    fn load(&self) -> Result<ExperimentConfig, BenchError> {
        let mut cfg = config::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }

    fn cache(&self) -> Result<ParamCache, BenchError> {
        ParamCache::with_dir(self.out.join("cache"))
    }
}

/// Runs the CLI on the given argv and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err @ BenchError::Config(_)) => {
            eprintln!("{err}");
            1
        }
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

fn write_and_report(path: &Path, content: &str) -> Result<(), BenchError> {
    artifacts::write_text(path, content)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Oracle(args) => {
            let cfg = args.load()?;
            let exact = exact_reference(&cfg.tfi, &cfg.grid)?;
            let csv = artifacts::oracle_csv(&cfg.grid.times(), &exact);
            write_and_report(&args.out.join("oracle.csv"), &csv)
        }
        Command::Train(args) => {
            let cfg = args.load()?;
            let mut cache = args.cache()?;
            let steps = cache.get_or_train_evolution(&cfg)?;
            let json = serde_json::to_string_pretty(&steps)?;
            write_and_report(&args.out.join("trained_params.json"), &json)?;
            for step in &steps {
                println!("  t = {:>5.1}  cost = {:.3e}", step.t, step.cost);
            }
            Ok(())
        }
        Command::Calibrate(args) => {
            let mut cfg = args.load()?;
            // Calibrate always builds both matrices regardless of the
            // configured mitigation modes.
            cfg.mitigation_modes = vec![MitigationMode::Readout, MitigationMode::Full];
            let mut cache = args.cache()?;
            let identity = cache.get_or_train_identity(&cfg)?;
            if cfg.identity_mode == IdentityMode::Variational {
                println!("identity circuit cost = {:.3e}", identity.cost);
            }
            let (full, readout) = super::build_calibrations(&cfg, &identity)?;
            let full = full.expect("full mode requested");
            let readout = readout.expect("readout mode requested");
            println!(
                "full calibration: backend {:?}, cond = {:.4}",
                cfg.backend, full.cond
            );
            write_and_report(
                &args.out.join("calibration_full.json"),
                &serde_json::to_string_pretty(&full)?,
            )?;
            write_and_report(&args.out.join("calibration_full.csv"), &full.to_csv())?;
            write_and_report(
                &args.out.join("calibration_readout.json"),
                &serde_json::to_string_pretty(&readout)?,
            )?;
            write_and_report(&args.out.join("calibration_readout.csv"), &readout.to_csv())
        }
        Command::Run(args) => {
            let cfg = args.load()?;
            let mut cache = args.cache()?;
            let records = super::run_experiment(&cfg, &mut cache)?;
            let csv = artifacts::records_csv(&records);
            write_and_report(&args.out.join("run.csv"), &csv)
        }
        Command::Sweep(args) => {
            let cfg = args.load()?;
            let mut cache = args.cache()?;
            let rows = super::sweep(&cfg, &mut cache)?;
            let csv = artifacts::sweep_csv(&rows);
            write_and_report(&args.out.join("sweep.csv"), &csv)
        }
        Command::Plot(args) => {
            let text = std::fs::read_to_string(&args.input)?;
            let svg = artifacts::csv_to_svg(&text)?;
            let output = args
                .output
                .unwrap_or_else(|| args.input.with_extension("svg"));
            write_and_report(&output, &svg)
        }
    }
}
