//! `janus`: simulate, fit, compare, bench, synthesize and serve.

mod commands;
mod outputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit status for malformed invocations.
const EXIT_USAGE: u8 = 2;
/// Exit status for unreadable, invalid or inconsistent data.
const EXIT_DATA: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "janus",
    version,
    about = "Magnetically steered Janus microparticle simulator"
)]
pub struct Cli {
    /// Master seed; overrides any seed in the input files.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress progress and summary output on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Full,
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Each particle replayed with its own fitted F.
    Per,
    /// Every particle replayed with the mean fitted F.
    Mean,
}

/// Particle and fluid constants assumed when fitting tracks.
#[derive(Debug, Clone, Args)]
pub struct FitConstants {
    #[arg(long, default_value_t = 0.401)]
    pub mass_ng: f64,
    #[arg(long, default_value_t = 4.6)]
    pub radius_um: f64,
    #[arg(long = "viscosity-cp", default_value_t = 1.245)]
    pub viscosity_cp: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario; writes trajectories.csv and summary.json.
    Simulate {
        scenario: PathBuf,
        /// Overrides the scenario's solver method.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Disable Brownian noise.
        #[arg(long)]
        no_noise: bool,
    },
    /// Fit F/m and phi per particle; writes fit.csv and fit.json.
    Fit {
        tracks: PathBuf,
        schedule: PathBuf,
        windows: PathBuf,
        #[command(flatten)]
        constants: FitConstants,
    },
    /// Fit, replay and score tracks; writes report.json and overlay.csv.
    Compare {
        tracks: PathBuf,
        schedule: PathBuf,
        windows: PathBuf,
        #[arg(long, value_enum, default_value = "per")]
        mode: ModeArg,
        #[command(flatten)]
        constants: FitConstants,
    },
    /// Time the full and reduced models on one scenario; writes bench.json.
    Bench {
        /// Scenario file; the three-particle reference scenario if omitted.
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        reps: usize,
    },
    /// Generate a seeded synthetic dataset with ground truth.
    Synth {
        /// Scenario file; the three-particle reference scenario if omitted.
        params: Option<PathBuf>,
        /// Generate noise-free tracks.
        #[arg(long)]
        no_noise: bool,
    },
    /// Serve live steering sessions over TCP (JSON lines or WebSocket).
    Serve {
        #[arg(long, default_value_t = 7878)]
        port: u16,
        /// Scenario providing particles, fluid and initial field.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Simulated seconds per wall-clock second.
        #[arg(long, default_value_t = 1.0)]
        time_scale: f64,
        #[arg(long, default_value_t = 30.0)]
        tick_rate: f64,
        /// Exit after serving this many connections.
        #[arg(long)]
        max_connections: Option<usize>,
        /// Write a replayable transcript per connection into --out.
        #[arg(long)]
        record: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.quiet {
        "warn"
    } else {
        "info"
    }))
    .format_timestamp(None)
    .init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<commands::Usage>().is_some() => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_DATA)
        }
    }
}
