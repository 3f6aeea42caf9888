//! `bupd`: analysis, cutoff calibration and operating-characteristic
//! simulation for basket trials.

mod bundle;
mod commands;
mod config;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bundle::Invocation;

/// Environment variable overriding the worker thread count.
const THREADS_ENV: &str = "BUPD_THREADS";

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Io(String),
    Mismatch(String),
}

impl CliError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    fn core(context: &str, e: bupd::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(format!("{context}: {e}"))
        } else {
            CliError::Numerical(format!("{context}: {e}"))
        }
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) | CliError::Mismatch(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Mismatch(m) => write!(f, "replay mismatch: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "bupd", version, about = "Basket-trial analysis with unit-information borrowing priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit models to observed trial data.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// Configured label or model kind; repeatable. Defaults to every configured model.
        #[arg(long = "model", num_args = 1..)]
        models: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Calibrate efficacy cutoffs under the global null.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "model", num_args = 1..)]
        models: Vec<String>,
        /// Target per-type type-1 error.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Operating characteristics over scenarios for calibrated models.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// `cutoffs.json` from `calibrate`; entries override `cutoffs` in the config.
        #[arg(long)]
        cutoffs: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run a recorded run and check its outputs are reproduced exactly.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn set_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Validation(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Validation(format!("{THREADS_ENV}: {e}")))
}

fn execute(command: Command) -> Result<commands::Status, CliError> {
    set_threads()?;
    match command {
        Command::Analyze { config, models, seed, out } => {
            let text = commands::read_config(&config)?;
            commands::run(&Invocation::Analyze { models, seed }, &text, &out)
        }
        Command::Calibrate { config, models, alpha, reps, seed, out } => {
            let text = commands::read_config(&config)?;
            let parsed = config::RunConfig::parse(&text)?;
            let alpha = alpha.or(parsed.alpha).unwrap_or(commands::DEFAULT_ALPHA);
            commands::run(&Invocation::Calibrate { models, alpha, reps, seed }, &text, &out)
        }
        Command::Simulate { config, cutoffs, reps, seed, out } => {
            let text = commands::read_config(&config)?;
            let parsed = config::RunConfig::parse(&text)?;
            let mut merged: BTreeMap<String, f64> = parsed.cutoffs.unwrap_or_default();
            if let Some(path) = cutoffs {
                merged.extend(commands::read_cutoffs(&path)?);
            }
            commands::run(&Invocation::Simulate { cutoffs: merged, reps, seed }, &text, &out)
        }
        Command::Replay { manifest, out } => commands::replay(&manifest, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(status) if status.failures > 0 => {
            eprintln!("{} simulation cell(s) failed; see manifest.json", status.failures);
            ExitCode::from(4)
        }
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
