//! Command-line front end for the polariton spectroscopy library.
//!
//! Each subcommand loads a TOML configuration (or the documented defaults),
//! applies `--set` overrides, runs one scan through [`polspec_core`], and
//! writes its outputs plus a manifest into the output directory.
//!
//! Exit codes: 0 on success, 1 on configuration or usage errors, 2 when a
//! numerical check fails (unconverged delay span, reference-comparison
//! failure, convergence-check drift, non-finite trajectories, degenerate
//! polariton modes).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use polspec_core::{Config, CoreError, ScanKind};

pub mod heatmap;
pub mod runner;

/// Tolerance for the `--convergence-check` step-halving drift, relative to
/// each spectrum's peak magnitude.
pub const CONVERGENCE_TOL: f64 = 1e-5;

/// Allowed pointwise relative deviation between the propagated and the
/// analytic long-delay pathway curves in the `stationary` subcommand.
pub const STATIONARY_MATCH_TOL: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(
    name = "polspec",
    version,
    about = "Phase-cycled 1D and 2D transmission spectra of anharmonic vibrational polaritons"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Probe-only linear transmission spectrum and polariton modes
    Linear(CommonArgs),
    /// Differential-transmission trace at zero excitation delay and fixed waiting delay
    PumpProbe(CommonArgs),
    /// Excitation-delay scan assembled into single-quantum 2D spectra
    #[command(name = "scan-1q")]
    Scan1q(CommonArgs),
    /// Waiting-delay scan assembled into the double-quantum-coherence 2D spectrum
    #[command(name = "scan-2qc")]
    Scan2qc(CommonArgs),
    /// Analytic long-delay pathway decomposition with propagated counterparts
    Stationary(CommonArgs),
    /// Compare the perturbative engine against the explicit phase-cycled mean-field route
    OracleValidate(CommonArgs),
    /// Repeat the configured scan over a list of values of one parameter
    Sweep(SweepArgs),
}

impl Command {
    /// The scan this subcommand forces, if any (`sweep` keeps the configured
    /// kind).
    pub fn scan_kind(&self) -> Option<ScanKind> {
        match self {
            Command::Linear(_) => Some(ScanKind::Linear),
            Command::PumpProbe(_) => Some(ScanKind::PumpProbe),
            Command::Scan1q(_) => Some(ScanKind::Scan1q),
            Command::Scan2qc(_) => Some(ScanKind::Scan2qc),
            Command::Stationary(_) => Some(ScanKind::Stationary),
            Command::OracleValidate(_) => Some(ScanKind::OracleValidate),
            Command::Sweep(_) => None,
        }
    }

    /// The common flag block of any subcommand.
    pub fn common(&self) -> &CommonArgs {
        match self {
            Command::Linear(c)
            | Command::PumpProbe(c)
            | Command::Scan1q(c)
            | Command::Scan2qc(c)
            | Command::Stationary(c)
            | Command::OracleValidate(c) => c,
            Command::Sweep(s) => &s.common,
        }
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    /// Path to a TOML configuration file; the documented defaults apply when omitted
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Override one configuration value as section.key=value (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Output directory (overrides scan.out_dir)
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Worker threads; defaults to all available cores
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,

    /// Render a BMP heatmap of every 2D grid
    #[arg(long)]
    pub heatmap: bool,

    /// Re-run a representative propagation at half the step and fail on drift
    #[arg(long)]
    pub convergence_check: bool,
}

/// Arguments of the `sweep` subcommand.
#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Configuration key to sweep, as section.key
    #[arg(long, value_name = "SECTION.KEY")]
    pub key: String,

    /// Comma-separated list of values to sweep over
    #[arg(long, value_name = "V1,V2,...")]
    pub values: String,
}

/// Entry point for the binary: parse, run, and map errors to exit codes.
pub fn main_impl() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    match runner::run(&cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}

/// Exit-code policy: 1 for anything the user can fix in the configuration or
/// invocation, 2 for failed numerical checks discovered while running.
pub fn exit_code(err: &CoreError) -> i32 {
    match err {
        CoreError::ConfigParse(_)
        | CoreError::ConfigInvalid(_)
        | CoreError::OverrideInvalid { .. }
        | CoreError::StepTooLarge { .. }
        | CoreError::InvalidComponent(_)
        | CoreError::PhaseGridTooCoarse { .. }
        | CoreError::Io { .. } => 1,
        CoreError::ValidationFailed(_)
        | CoreError::InvalidTrajectory(_)
        | CoreError::DegeneratePolaritons { .. }
        | CoreError::InvalidSpectrum(_) => 2,
    }
}

/// Load the configuration for a subcommand: file, overrides, then the
/// subcommand's own forced scan kind and output directory.
pub fn load_cli_config(common: &CommonArgs, forced: Option<ScanKind>) -> Result<Config, CoreError> {
    let text = match &common.config {
        Some(path) => Some(std::fs::read_to_string(path).map_err(|source| CoreError::Io {
            path: path.display().to_string(),
            source,
        })?),
        None => None,
    };
    let mut cfg = polspec_core::config::load_config(text.as_deref(), &common.set)?;
    if let Some(kind) = forced {
        cfg.scan.scan_kind = kind;
    }
    if let Some(out) = &common.out {
        cfg.scan.out_dir = out.display().to_string();
    }
    Ok(cfg)
}
