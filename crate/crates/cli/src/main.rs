//! `esrstm-lab`: simulate, calibrate, fit and plot ESR-STM experiments.
//!
//! Exit codes: 0 success, 1 soft analysis failure, 2 usage or configuration
//! error, 3 I/O error.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod io;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use esrstm_core::pipeline::Weighting;

use crate::commands::{CalibrateArgs, SimulateArgs};
use crate::error::CliResult;

#[derive(Parser)]
#[command(name = "esrstm-lab", version, about = "Simulate, calibrate and analyse ESR-STM spectra")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Auto,
    Weighted,
    Unweighted,
}

impl From<WeightingArg> for Weighting {
    fn from(w: WeightingArg) -> Self {
        match w {
            WeightingArg::Auto => Weighting::Auto,
            WeightingArg::Weighted => Weighting::Weighted,
            WeightingArg::Unweighted => Weighting::Unweighted,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one ΔI(f) spectrum to CSV.
    SimulateSpectrum {
        /// Experiment config (TOML); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Commanded field in T (≥ 0).
        #[arg(long, allow_negative_numbers = true)]
        b_field: f64,
        /// `lobe:k`, `center`, or `x,y` in nm. Defaults to the config position.
        #[arg(long)]
        position: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the noise standard deviation, A.
        #[arg(long)]
        sigma: Option<f64>,
        /// Hz.
        #[arg(long)]
        f_start: Option<f64>,
        /// Hz.
        #[arg(long)]
        f_stop: Option<f64>,
        /// Hz.
        #[arg(long)]
        f_step: Option<f64>,
    },
    /// Compute a power table that flattens the junction V_RF over a band.
    Calibrate {
        /// Line model: TOML (`kind = "parametric"|"tabulated"`) or a
        /// `frequency_hz,transmission` CSV.
        #[arg(long)]
        line: PathBuf,
        /// V.
        #[arg(long)]
        target_vrf: f64,
        /// `f_lo:f_hi` in Hz.
        #[arg(long)]
        band: String,
        /// Power-table CSV; a JSON summary is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Experiment config whose `[calibration]` table supplies protocol settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Relative noise on every simulated bench reading.
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit a Lorentzian to one spectrum CSV.
    FitPeak {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5.0)]
        k_mad: f64,
    },
    /// Fit the Zeeman line through spectra CSVs or fit-peak JSONs.
    ZeemanFit {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        weighting: WeightingArg,
        #[arg(long, default_value_t = 5.0)]
        k_mad: f64,
    },
    /// Detect and fit the resonance at every configured spatial position.
    SpatialMap {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Calibrate, synthesize, analyse and check against the configured envelopes.
    Roundtrip {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a CSV or JSON output as SVG.
    Plot {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::SimulateSpectrum { config, b_field, position, out, seed, sigma, f_start, f_stop, f_step } => {
            commands::simulate_spectrum(&SimulateArgs {
                config,
                b_field,
                position,
                out,
                seed,
                sigma,
                f_start,
                f_stop,
                f_step,
            })
        }
        Command::Calibrate { line, target_vrf, band, out, config, noise, seed } => {
            commands::calibrate_cmd(&CalibrateArgs { line, target_vrf, band, out, config, noise, seed })
        }
        Command::FitPeak { input, out, k_mad } => commands::fit_peak(&input, &out, k_mad),
        Command::ZeemanFit { inputs, out, weighting, k_mad } => {
            commands::zeeman_fit(&inputs, &out, weighting.into(), k_mad)
        }
        Command::SpatialMap { config, seed, out } => commands::spatial_map(config.as_deref(), seed, &out),
        Command::Roundtrip { config, seed, out } => commands::roundtrip(config.as_deref(), seed, &out),
        Command::Plot { input, out } => commands::plot(&input, &out),
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors and 0 for --help.
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("esrstm-lab: {e}");
            e.code()
        }
    }
}
