use std::path::{Path, PathBuf};
use std::process::ExitCode;

use christoffel_ls::experiment::{
    emit_plots, run_conditioning_sweep, run_sweep, validate, write_outputs, ExperimentConfig, PlotStyle, Suite,
    SweepOutput,
};
use christoffel_ls::Error;
use clap::{Parser, Subcommand};

const EXIT_VALIDATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Weighted least-squares approximation on irregular domains.
#[derive(Parser)]
#[command(name = "christoffel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded sweep and write results.csv and summary.json.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (defaults to the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep the constant C under linear and log-linear sample rules.
    Conditioning {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a self-check suite and print a JSON report.
    Validate {
        /// orthonormality, distributions, recovery, chernoff or oracle.
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write matplotlib scripts for a results CSV.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        /// fig1 (E_tau vs M), fig3 (C vs N) or fig6 (E_tau_tilde vs M).
        #[arg(long)]
        style: String,
        /// Directory for the scripts (defaults to the CSV's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Json(_) => EXIT_CONFIG,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_NUMERICAL,
    }
}

fn load(config: &Path, seed: Option<u64>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn report_sweep(output: &SweepOutput, out: PathBuf) -> Result<(), Error> {
    let (csv, json) = write_outputs(output, &out)?;
    let failed = output.trial_rows().filter(|r| !r.is_ok()).count();
    eprintln!(
        "wrote {} rows to {} and summary to {} ({failed} failed fits)",
        output.rows.len(),
        csv.display(),
        json.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Sweep { config, seed, out } => {
            let cfg = load(&config, seed)?;
            let output = run_sweep(&cfg)?;
            report_sweep(&output, out.unwrap_or_else(|| cfg.output.clone()))?;
            Ok(0)
        }
        Command::Conditioning { config, seed, out } => {
            let cfg = load(&config, seed)?;
            let output = run_conditioning_sweep(&cfg)?;
            report_sweep(&output, out.unwrap_or_else(|| cfg.output.clone()))?;
            Ok(0)
        }
        Command::Validate { suite, seed } => {
            let suite: Suite = suite.parse()?;
            let report = validate(suite, seed)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(if report.passed { 0 } else { EXIT_VALIDATION })
        }
        Command::Plot { csv, style, out } => {
            let style: PlotStyle = style.parse()?;
            let dir = out.unwrap_or_else(|| {
                csv.parent()
                    .map(|p| p.to_path_buf())
                    .unwrap_or_else(|| PathBuf::from("."))
            });
            let scripts = emit_plots(&csv, style, &dir).map_err(|e| match e {
                Error::Csv(msg) | Error::Data(msg) => Error::Config(format!("{}: {msg}", csv.display())),
                Error::Io(err) => Error::Config(format!("{}: {err}", csv.display())),
                other => other,
            })?;
            for path in scripts {
                println!("{}", path.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
