//! `wfrecover` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error, 3 solver
//! failure.

pub mod format;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::datamodel::GridGeometry;
use crate::error::Error;
use crate::evaluate::{band_to_volume, fmt_sig, observe_band};
use crate::sampling::SourceMask;
use crate::solver::{Penalty, SolveParams, StepRule};
use crate::spectral::{apply_bandpass, snr_db_volume, BandpassSpec};
use crate::sweep::{recover_band, SweepConfig, SweepMode};
use crate::synth::{generate, random_events, SynthConfig};

use self::format::{read_volume_file, write_volume_file};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "wfrecover", version, about = "Weighted low-rank seismic wavefield recovery")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic line of hyperbolic events.
    Synth {
        #[arg(long, default_value_t = 64)]
        sources: usize,
        #[arg(long, default_value_t = 64)]
        receivers: usize,
        #[arg(long, default_value_t = 512)]
        nt: usize,
        #[arg(long, default_value_t = 0.004)]
        dt: f64,
        #[arg(long, default_value_t = 4)]
        events: usize,
        #[arg(long, default_value_t = 20.0)]
        peak_freq: f64,
        /// Source and receiver spacing in meters.
        #[arg(long, default_value_t = 12.5)]
        spacing: f64,
        /// Add white noise at this S/R (dB).
        #[arg(long)]
        noise_db: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a jittered source mask.
    Mask {
        #[arg(long)]
        sources: usize,
        #[arg(long, default_value_t = 4)]
        factor: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Subsample a volume with a mask and recover it frequency by frequency.
    Reconstruct {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value = "limited")]
        mode: String,
        #[arg(long, default_value_t = 85)]
        rank: usize,
        #[arg(long, default_value_t = 25)]
        subspace_rank: usize,
        #[arg(long, default_value_t = 0.5)]
        weight: f64,
        #[arg(long, default_value_t = 7.0)]
        fmin: f64,
        #[arg(long, default_value_t = 74.0)]
        fmax: f64,
        #[arg(long, default_value_t = 150)]
        iters: usize,
        /// Frobenius penalty relative to the squared data norm of each slice.
        #[arg(long, default_value_t = 1e-6)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        snr_csv: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Time-domain S/R of a test volume after bandpassing both volumes.
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long = "pass", default_value = "7:74")]
        pass_band: String,
        #[arg(long, default_value_t = 3.66)]
        transition: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the raised-cosine bandpass to a volume.
    Bandpass {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "pass", default_value = "7:74")]
        pass_band: String,
        #[arg(long, default_value_t = 3.66)]
        transition: f64,
    },
}

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(msg: impl std::fmt::Display) -> Self {
        CliError { code: EXIT_USAGE, message: msg.to_string() }
    }

    fn data(msg: impl std::fmt::Display) -> Self {
        CliError { code: EXIT_DATA, message: msg.to_string() }
    }

    fn solver(msg: impl std::fmt::Display) -> Self {
        CliError { code: EXIT_SOLVER, message: msg.to_string() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Argument(_) => CliError::usage(e),
            Error::Numeric { .. } => CliError::solver(e),
            Error::Format(_) | Error::Io(_) => CliError::data(e),
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Synth { sources, receivers, nt, dt, events, peak_freq, spacing, noise_db, seed, out } => {
            let geometry = GridGeometry::new(sources, receivers, nt, dt, spacing, spacing)?;
            let cfg = SynthConfig {
                geometry,
                events: random_events(events, &geometry, seed),
                peak_freq,
                seed,
                noise_db,
            };
            let volume = generate(&cfg)?;
            write_volume_file(&out, &volume).map_err(CliError::data)
        }
        Command::Mask { sources, factor, seed, out } => {
            let mask = SourceMask::jittered(sources, factor, seed)?;
            write_text(&out, &mask.to_text())
        }
        Command::Reconstruct {
            data,
            mask,
            mode,
            rank,
            subspace_rank,
            weight,
            fmin,
            fmax,
            iters,
            lambda,
            seed,
            out,
            snr_csv,
            truth,
        } => {
            let mode: SweepMode = mode.parse()?;
            if mode == SweepMode::LimitedSubspace && subspace_rank > rank {
                return Err(CliError::usage(format!(
                    "--subspace-rank {subspace_rank} exceeds --rank {rank}"
                )));
            }
            let cfg = SweepConfig {
                f_min: fmin,
                f_max: fmax,
                subspace_rank,
                weight,
                mode,
                solve: SolveParams {
                    rank,
                    max_iters: iters,
                    lambda: Penalty::RelativeToData(lambda),
                    misfit_tol: 0.0,
                    seed,
                    step_rule: StepRule::BarzilaiBorwein,
                },
            };
            cfg.validate()?;
            reconstruct(&data, &mask, &cfg, &out, snr_csv.as_deref(), truth.as_deref())
        }
        Command::Evaluate { truth, test, pass_band, transition, out } => {
            let bp = parse_bandpass(&pass_band, transition)?;
            let truth = read_volume_file(&truth).map_err(CliError::data)?;
            let test = read_volume_file(&test).map_err(CliError::data)?;
            if truth.geometry() != test.geometry() {
                return Err(CliError::data("truth and test volumes have different geometries"));
            }
            let snr = snr_db_volume(&apply_bandpass(&truth, &bp), &apply_bandpass(&test, &bp))
                .map_err(CliError::data)?;
            write_text(&out, &format!("metric,value\ntime_domain_snr_db,{}\n", fmt_sig(snr)))
        }
        Command::Bandpass { input, out, pass_band, transition } => {
            let bp = parse_bandpass(&pass_band, transition)?;
            let v = read_volume_file(&input).map_err(CliError::data)?;
            write_volume_file(&out, &apply_bandpass(&v, &bp)).map_err(CliError::data)
        }
    }
}

fn reconstruct(
    data: &Path,
    mask_path: &Path,
    cfg: &SweepConfig,
    out: &Path,
    snr_csv: Option<&Path>,
    truth: Option<&Path>,
) -> Result<(), CliError> {
    let volume = read_volume_file(data).map_err(CliError::data)?;
    let mask_text = std::fs::read_to_string(mask_path)
        .map_err(|e| CliError::data(format!("{}: {e}", mask_path.display())))?;
    let mask = SourceMask::parse(&mask_text).map_err(CliError::data)?;
    let geometry = *volume.geometry();
    if mask.n_sources() != geometry.n() {
        return Err(CliError::data(format!(
            "mask covers {} sources, data has {}",
            mask.n_sources(),
            geometry.n()
        )));
    }
    let observed = observe_band(&volume, &mask, cfg.f_min, cfg.f_max).map_err(CliError::data)?;
    let truth_slices = match truth {
        None => None,
        Some(path) => {
            let t = read_volume_file(path).map_err(CliError::data)?;
            if t.geometry() != volume.geometry() {
                return Err(CliError::data("truth geometry differs from the data"));
            }
            Some(observe_band(&t, &mask, cfg.f_min, cfg.f_max).map_err(CliError::data)?.truth)
        }
    };
    let band = recover_band(&observed.observed, &mask, &geometry, cfg, truth_slices.as_deref())
        .map_err(CliError::solver)?;
    let recovered = band_to_volume(&band, &geometry).map_err(CliError::data)?;
    write_volume_file(out, &recovered).map_err(CliError::data)?;

    if let Some(csv_path) = snr_csv {
        if truth_slices.is_none() {
            log::warn!("--snr-csv needs --truth; no S/R table written");
        } else {
            let mut csv = String::from("freq_hz,snr_db\n");
            for s in &band.slices {
                writeln!(csv, "{},{}", fmt_sig(s.freq_hz), fmt_sig(s.snr_db.unwrap_or(f64::NAN)))
                    .unwrap();
            }
            write_text(csv_path, &csv)?;
        }
    }
    Ok(())
}

fn parse_bandpass(pass: &str, transition: f64) -> Result<BandpassSpec, CliError> {
    let (lo, hi) = pass
        .split_once(':')
        .ok_or_else(|| CliError::usage(format!("--pass expects LO:HI, got {pass:?}")))?;
    let parse = |s: &str| {
        s.trim().parse::<f64>().map_err(|e| CliError::usage(format!("bad frequency {s:?}: {e}")))
    };
    Ok(BandpassSpec::new(parse(lo)?, parse(hi)?, transition)?)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}
