//! `spinres`: simulate field sweeps, extract peaks, fit crossings and
//! evaluate the spin-count, pump-rate and temperature estimators.
//!
//! Exit codes: 0 success, 1 usage, 2 input or parse error, 3 a required fit
//! failed to converge, 4 internal error.

// negated comparisons reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use spinres::Error;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SPINRES_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "spinres", version, about = "Spin-ensemble resonator sweeps and fits")]
pub struct Cli {
    /// Read frequency-valued estimator flags (--g, --omega-c, --d) in MHz
    /// instead of Hz.
    #[arg(long, global = true)]
    pub mhz: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a transmission sweep from a scenario and write a sweep file.
    Simulate(SimulateArgs),
    /// Extract per-field resonance peaks from a sweep file.
    Peaks(PeaksArgs),
    /// Peaks, crossing fits and masked Q fits, with report and plot data.
    Analyze(AnalyzeArgs),
    /// Closed-form estimators.
    #[command(subcommand)]
    Estimate(EstimateCommand),
    /// Print or convert a saved report.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario TOML file, or builtin:fig2a, builtin:fig2c, builtin:bare.
    #[arg(long)]
    pub config: String,
    /// Sweep file to write [default: <out-dir>/<scenario>.sweep].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output directory when --out is not given [default: $SPINRES_OUT_DIR,
    /// then the scenario's output.dir, then ./spinres-out].
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the scenario noise σ (linear amplitude units).
    #[arg(long)]
    pub noise: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PeaksArgs {
    #[arg(long)]
    pub sweep: PathBuf,
    /// Peak-trace file to write [default: <out-dir>/peaks.tsv].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Keep only the tallest peak per field.
    #[arg(long)]
    pub primary_only: bool,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub sweep: PathBuf,
    /// Scenario supplying the crossing windows and Q-dip masks.
    #[arg(long)]
    pub config: String,
    /// Directory for all artifacts [default: $SPINRES_OUT_DIR, then the
    /// scenario's output.dir, then ./spinres-out].
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Skip the SVG renderings.
    #[arg(long)]
    pub no_svg: bool,
}

#[derive(Subcommand, Debug)]
pub enum EstimateCommand {
    /// Ensemble size N = (g/g0)^2.
    Spins(SpinsArgs),
    /// Optical pump rate per spin.
    Pump(PumpArgs),
    /// Effective spin temperature from a coupling ratio.
    Temperature(TemperatureArgs),
}

#[derive(Args, Debug)]
pub struct SpinsArgs {
    /// Ensemble coupling g (Hz, or MHz with --mhz).
    #[arg(long)]
    pub g: f64,
    /// Cavity frequency (Hz, or MHz with --mhz).
    #[arg(long)]
    pub omega_c: f64,
    /// Mode volume (m^3).
    #[arg(long)]
    pub volume: f64,
    /// Transition matrix element of S_x.
    #[arg(long, default_value_t = 3f64.sqrt() / 2.0)]
    pub element: f64,
    /// Electron g-factor.
    #[arg(long, default_value_t = 2.002)]
    pub ge: f64,
}

#[derive(Args, Debug)]
pub struct PumpArgs {
    /// Absorption cross-section (m^2).
    #[arg(long)]
    pub sigma: f64,
    /// Optical power (W).
    #[arg(long)]
    pub power: f64,
    /// Wavelength (m).
    #[arg(long)]
    pub wavelength: f64,
    /// Illuminated area (m^2).
    #[arg(long)]
    pub area: f64,
    /// Spin relaxation rate (Hz); prints the relaxation/pump ratio.
    #[arg(long)]
    pub relaxation: Option<f64>,
}

#[derive(Args, Debug)]
pub struct TemperatureArgs {
    /// Observed coupling ratio between the lowest and the thermal transition.
    #[arg(long)]
    pub ratio: f64,
    /// Cavity frequency (Hz, or MHz with --mhz).
    #[arg(long)]
    pub omega_c: f64,
    /// Zero-field parameter D of the ladder (Hz, or MHz with --mhz).
    #[arg(long = "d", alias = "D", required_unless_present = "config")]
    pub d: Option<f64>,
    /// Take D from the scenario's [thermal] section instead.
    #[arg(long)]
    pub config: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Format {
    /// Summary table of fitted values.
    Summary,
    Json,
    Tsv,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Report JSON written by `analyze`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Summary)]
    pub format: Format,
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Why a command stopped; each variant maps to one exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(Error),
    /// Artifacts were written but a required fit did not converge.
    NotConverged(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(e) => match e {
                Error::Parse { .. } | Error::Config(_) | Error::Io { .. } | Error::Domain(_) => 2,
                Error::Fit(_) | Error::Convergence(_) | Error::RankDeficient(_) => 3,
            },
            Failure::NotConverged(_) => 3,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::NotConverged(m) => m.clone(),
            Failure::Core(e) => e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match std::panic::catch_unwind(|| commands::run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(4)
        }
    }
}
