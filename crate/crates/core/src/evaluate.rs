//! Turning recovered bands back into volumes and comparing sweep modes.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::datamodel::{embed_matrix, extract_matrix, FrequencySlice, GridGeometry, SeismicVolume};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::sampling::{ObservedData, SamplingOperator, SourceMask};
use crate::spectral::{
    apply_bandpass, forward_time_fft, inverse_time_fft, nearest_bin, snr_db_volume, BandpassSpec,
    FrequencyCube,
};
use crate::sweep::{recover_band, RecoveredBand, SweepConfig, SweepMode};

/// Subsampled observations of a volume over a frequency band, together with
/// the fully sampled MH slices they came from.
#[derive(Debug, Clone)]
pub struct BandData {
    pub bins: Vec<usize>,
    pub observed: Vec<ObservedData>,
    pub truth: Vec<FrequencySlice>,
}

/// Transforms `volume`, keeps the bins in `[f_min, f_max]`, moves them to the
/// MH domain and samples them with `mask`.
pub fn observe_band(volume: &SeismicVolume, mask: &SourceMask, f_min: f64, f_max: f64) -> Result<BandData> {
    let cube = forward_time_fft(volume);
    let bins = cube.bins_in_band(f_min, f_max);
    if bins.is_empty() {
        return Err(Error::arg(format!("no frequency bins inside [{f_min}, {f_max}] Hz")));
    }
    let n = volume.geometry().n();
    let op = SamplingOperator::new(mask, n)?;
    let mut observed = Vec::with_capacity(bins.len());
    let mut truth = Vec::with_capacity(bins.len());
    for &k in &bins {
        let mh = embed_matrix(cube.bin_matrix(k))?;
        observed.push(ObservedData { freq_hz: cube.freq(k), n_receivers: n, values: op.apply(&mh)? });
        truth.push(FrequencySlice::midpoint_offset(cube.freq(k), mh)?);
    }
    Ok(BandData { bins, observed, truth })
}

/// Places each recovered slice at its nearest FFT bin (all other bins zero)
/// and transforms back to time.
pub fn band_to_volume(band: &RecoveredBand, geometry: &GridGeometry) -> Result<SeismicVolume> {
    let mut cube = FrequencyCube::zeros(*geometry);
    let n = geometry.n();
    let mut filled = vec![false; cube.n_bins()];
    for slice in &band.slices {
        let k = nearest_bin(geometry, slice.freq_hz)?;
        if std::mem::replace(&mut filled[k], true) {
            return Err(Error::arg(format!("two recovered slices snap to bin {k}")));
        }
        if slice.factors.dim() != 2 * n - 1 {
            return Err(Error::arg("recovered factors do not match the geometry"));
        }
        *cube.bin_matrix_mut(k) = extract_matrix(&slice.factors.product())?;
    }
    inverse_time_fft(&cube)
}

/// Volume holding only the observed sources (zeros elsewhere).
pub fn zero_filled(volume: &SeismicVolume, mask: &SourceMask) -> Result<SeismicVolume> {
    let g = *volume.geometry();
    if mask.n_sources() != g.n() {
        return Err(Error::arg("mask does not match the volume"));
    }
    let mut out = SeismicVolume::zeros(g);
    for &s in mask.kept() {
        for r in 0..g.n() {
            out.trace_mut(s, r).copy_from_slice(volume.trace(s, r));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ModeResult {
    /// `(freq_hz, slice S/R in dB)` in ascending frequency.
    pub per_frequency: Vec<(f64, f64)>,
    /// S/R of the bandpassed reconstruction against the bandpassed truth.
    pub time_domain_snr_db: f64,
    pub band: RecoveredBand,
}

impl ModeResult {
    /// Mean slice S/R over frequencies in `[lo, hi]`.
    pub fn mean_snr_between(&self, lo: f64, hi: f64) -> Option<f64> {
        let picked: Vec<f64> =
            self.per_frequency.iter().filter(|(f, _)| (lo..=hi).contains(f)).map(|&(_, s)| s).collect();
        (!picked.is_empty()).then(|| picked.iter().sum::<f64>() / picked.len() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct ModeOutcome {
    pub label: String,
    pub config: SweepConfig,
    pub result: std::result::Result<ModeResult, String>,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub outcomes: Vec<ModeOutcome>,
}

pub fn config_label(cfg: &SweepConfig) -> String {
    match cfg.mode {
        SweepMode::LimitedSubspace => {
            format!("{} r={} rs={}", cfg.mode.label(), cfg.rank(), cfg.subspace_rank)
        }
        _ => format!("{} r={}", cfg.mode.label(), cfg.rank()),
    }
}

impl ComparisonReport {
    /// Long-format per-frequency table: `config,label,freq_hz,snr_db`.
    pub fn per_frequency_csv(&self) -> String {
        let mut out = String::from("config,label,freq_hz,snr_db\n");
        for (i, o) in self.outcomes.iter().enumerate() {
            if let Ok(res) = &o.result {
                for &(f, s) in &res.per_frequency {
                    writeln!(out, "{i},{},{},{}", o.label, fmt_sig(f), fmt_sig(s)).unwrap();
                }
            }
        }
        out
    }

    /// One row per config: `config,label,time_domain_snr_db,mean_slice_snr_db,status`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("config,label,time_domain_snr_db,mean_slice_snr_db,status\n");
        for (i, o) in self.outcomes.iter().enumerate() {
            match &o.result {
                Ok(res) => {
                    let mean = res.mean_snr_between(f64::NEG_INFINITY, f64::INFINITY).unwrap_or(f64::NAN);
                    writeln!(
                        out,
                        "{i},{},{},{},ok",
                        o.label,
                        fmt_sig(res.time_domain_snr_db),
                        fmt_sig(mean)
                    )
                    .unwrap();
                }
                Err(e) => {
                    writeln!(out, "{i},{},,,\"{}\"", o.label, e.replace('"', "'")).unwrap();
                }
            }
        }
        out
    }
}

/// Runs every config against the same subsampled truth. Configs are
/// evaluated in parallel; a failing config is reported without stopping
/// the others.
pub fn compare_modes(
    truth: &SeismicVolume,
    mask: &SourceMask,
    configs: &[SweepConfig],
    bandpass: &BandpassSpec,
) -> Result<ComparisonReport> {
    if configs.is_empty() {
        return Err(Error::arg("no configurations to compare"));
    }
    let geometry = *truth.geometry();
    let filtered_truth = apply_bandpass(truth, bandpass);
    let outcomes = configs
        .par_iter()
        .map(|cfg| {
            let result = run_config(truth, &filtered_truth, mask, cfg, bandpass, &geometry)
                .map_err(|e| e.to_string());
            ModeOutcome { label: config_label(cfg), config: cfg.clone(), result }
        })
        .collect();
    Ok(ComparisonReport { outcomes })
}

fn run_config(
    truth: &SeismicVolume,
    filtered_truth: &SeismicVolume,
    mask: &SourceMask,
    cfg: &SweepConfig,
    bandpass: &BandpassSpec,
    geometry: &GridGeometry,
) -> std::result::Result<ModeResult, Box<dyn std::error::Error + Send + Sync>> {
    let data = observe_band(truth, mask, cfg.f_min, cfg.f_max)?;
    let band = recover_band(&data.observed, mask, geometry, cfg, Some(&data.truth))?;
    let per_frequency =
        band.slices.iter().map(|s| (s.freq_hz, s.snr_db.expect("truth supplied"))).collect();
    let recovered = apply_bandpass(&band_to_volume(&band, geometry)?, bandpass);
    let time_domain_snr_db = snr_db_volume(filtered_truth, &recovered)?;
    Ok(ModeResult { per_frequency, time_domain_snr_db, band })
}

/// Formats with six significant digits, trimming trailing zeros.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Dense MH slice recovered for each entry of `band` (invalid cells zeroed).
pub fn recovered_mh(band: &RecoveredBand) -> Result<Vec<CMatrix>> {
    band.slices.iter().map(|s| Ok(s.to_mh()?.values)).collect()
}
