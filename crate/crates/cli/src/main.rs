//! `disagg` — dictionary-based energy disaggregation harness.
//!
//! Exit codes: 0 on success, 1 when a solve failed to converge (outputs are
//! still written), 2 on configuration or IO errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{CommonArgs, CvMode, FileConfig, Settings};

/// A failure that should stop the run, carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    /// Configuration or IO problem: exit code 2.
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<disagg::Error> for CliError {
    fn from(e: disagg::Error) -> Self {
        CliError::config(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// Whether every solve in the run converged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Clean,
    Unconverged,
}

impl RunStatus {
    fn merge(self, other: RunStatus) -> RunStatus {
        if self == RunStatus::Clean && other == RunStatus::Clean {
            RunStatus::Clean
        } else {
            RunStatus::Unconverged
        }
    }
}

#[derive(Parser)]
#[command(
    name = "disagg",
    about = "Explain an aggregate meter signal as per-device consumption",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset with exact ground truth
    Synth {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of devices
        #[arg(long, default_value_t = 3)]
        devices: usize,
        /// Distinct daily profiles per device
        #[arg(long, default_value_t = 2)]
        states: usize,
        /// Days to generate
        #[arg(long, default_value_t = 8)]
        days: usize,
        /// Samples per day (must divide 86400)
        #[arg(long, default_value_t = 96)]
        samples_per_day: usize,
        /// Profile correlation knob in [0, 1]
        #[arg(long, default_value_t = 0.3)]
        correlation: f64,
        /// OFF schedule as device:day pairs, e.g. 2:5,0:3
        #[arg(long, value_delimiter = ',')]
        off_days: Vec<String>,
    },
    /// Build a signature dictionary from training days
    BuildDict {
        #[command(flatten)]
        common: CommonArgs,
        /// Fraction of days used for training
        #[arg(long)]
        train_fraction: Option<f64>,
    },
    /// Disaggregate aggregate windows with an existing dictionary
    Disaggregate {
        #[command(flatten)]
        common: CommonArgs,
        /// Dictionary directory written by build-dict
        #[arg(long)]
        dict: Option<PathBuf>,
        /// Test day selection: "all" or comma-separated indices
        #[arg(long)]
        days: Option<String>,
    },
    /// Benchmark methods across seeded splits and folds
    Crossval {
        #[command(flatten)]
        common: CommonArgs,
        /// Methods to benchmark (default: all three)
        #[arg(long, value_delimiter = ',', value_enum)]
        methods: Option<Vec<config::MethodName>>,
        /// Fold assignment mode
        #[arg(long, value_enum)]
        cv_mode: Option<CvMode>,
    },
    /// Two-stage run: building aggregate, then the HVAC estimate's components
    Hierarchical {
        #[command(flatten)]
        common: CommonArgs,
        /// Schema for the component-level stage
        #[arg(long)]
        stage2_schema: Option<PathBuf>,
        /// Fraction of days used for training
        #[arg(long)]
        train_fraction: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(RunStatus::Clean) => ExitCode::SUCCESS,
        Ok(RunStatus::Unconverged) => {
            eprintln!("warning: at least one window did not converge; results were written");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

fn run(cli: Cli) -> Result<RunStatus, CliError> {
    match cli.command {
        Command::Synth {
            common,
            devices,
            states,
            days,
            samples_per_day,
            correlation,
            off_days,
        } => {
            let settings = resolve(&common)?;
            commands::synth::run(
                &settings,
                devices,
                states,
                days,
                samples_per_day,
                correlation,
                &off_days,
            )
        }
        Command::BuildDict {
            common,
            train_fraction,
        } => {
            let mut settings = resolve(&common)?;
            if let Some(f) = train_fraction {
                settings.train_fraction = f;
            }
            commands::build_dict::run(&settings)
        }
        Command::Disaggregate {
            common,
            dict,
            days,
        } => {
            let mut settings = resolve(&common)?;
            if let Some(d) = dict {
                settings.dict = Some(d);
            }
            if let Some(d) = days {
                settings.days = d;
            }
            commands::disaggregate::run(&settings)
        }
        Command::Crossval {
            common,
            methods,
            cv_mode,
        } => {
            let mut settings = resolve(&common)?;
            if let Some(m) = methods {
                settings.methods = m;
            }
            if let Some(mode) = cv_mode {
                settings.cv_mode = mode;
            }
            commands::crossval::run(&settings)
        }
        Command::Hierarchical {
            common,
            stage2_schema,
            train_fraction,
        } => {
            let mut settings = resolve(&common)?;
            if let Some(s) = stage2_schema {
                settings.stage2_schema = Some(s);
            }
            if let Some(f) = train_fraction {
                settings.train_fraction = f;
            }
            commands::hierarchical::run(&settings)
        }
    }
}

fn resolve(common: &CommonArgs) -> Result<Settings, CliError> {
    let file = FileConfig::load(common.config.as_deref())?;
    Ok(Settings::resolve(common, &file))
}
