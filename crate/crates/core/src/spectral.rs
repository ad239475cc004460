//! Time ↔ frequency transforms of volumes, the evaluation bandpass, and the
//! S/R metric.
//!
//! The forward transform is the unnormalized DFT along time keeping bins
//! `0..=n_time/2`; the inverse carries the `1/n_time` factor.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::datamodel::{FrequencySlice, GridGeometry, SeismicVolume};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// Ceiling returned by the S/R metric for an exact match.
pub const SNR_CAP_DB: f64 = 300.0;

/// Non-negative frequency bins of a volume, one source × receiver matrix per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyCube {
    geometry: GridGeometry,
    slices: Vec<CMatrix>,
}

impl FrequencyCube {
    pub fn zeros(geometry: GridGeometry) -> Self {
        let n = geometry.n();
        FrequencyCube { geometry, slices: vec![CMatrix::zeros(n, n); geometry.n_bins()] }
    }

    pub fn new(geometry: GridGeometry, slices: Vec<CMatrix>) -> Result<Self> {
        if slices.len() != geometry.n_bins() {
            return Err(Error::arg(format!(
                "cube has {} bins, geometry with n_time = {} needs {}",
                slices.len(),
                geometry.n_time,
                geometry.n_bins()
            )));
        }
        let n = geometry.n();
        if slices.iter().any(|s| s.shape() != (n, n)) {
            return Err(Error::arg(format!("every bin must be a {n}x{n} matrix")));
        }
        Ok(FrequencyCube { geometry, slices })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn n_bins(&self) -> usize {
        self.slices.len()
    }

    pub fn freq(&self, bin: usize) -> f64 {
        bin as f64 * self.geometry.df()
    }

    pub fn freq_axis(&self) -> Vec<f64> {
        (0..self.n_bins()).map(|k| self.freq(k)).collect()
    }

    pub fn bin_matrix(&self, bin: usize) -> &CMatrix {
        &self.slices[bin]
    }

    pub fn bin_matrix_mut(&mut self, bin: usize) -> &mut CMatrix {
        &mut self.slices[bin]
    }

    /// Source–receiver slice at `bin`.
    pub fn slice(&self, bin: usize) -> FrequencySlice {
        FrequencySlice::source_receiver(self.freq(bin), self.slices[bin].clone())
            .expect("cube bins are square")
    }

    /// Bins whose centre frequency lies in `[f_min, f_max]`.
    pub fn bins_in_band(&self, f_min: f64, f_max: f64) -> Vec<usize> {
        (0..self.n_bins()).filter(|&k| (f_min..=f_max).contains(&self.freq(k))).collect()
    }

    /// Bin closest to `freq_hz`; errors outside `[0, Nyquist]`.
    pub fn nearest_bin(&self, freq_hz: f64) -> Result<usize> {
        nearest_bin(&self.geometry, freq_hz)
    }
}

pub fn nearest_bin(geometry: &GridGeometry, freq_hz: f64) -> Result<usize> {
    let nyq = geometry.nyquist();
    if !(0.0..=nyq).contains(&freq_hz) {
        return Err(Error::arg(format!("frequency {freq_hz} Hz is outside [0, {nyq}] Hz")));
    }
    let k = (freq_hz / geometry.df()).round() as usize;
    Ok(k.min(geometry.n_bins() - 1))
}

pub fn forward_time_fft(v: &SeismicVolume) -> FrequencyCube {
    let g = *v.geometry();
    let (n, nt) = (g.n(), g.n_time);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nt);
    let mut cube = FrequencyCube::zeros(g);
    let mut buf = vec![C64::new(0.0, 0.0); nt];
    for s in 0..n {
        for r in 0..n {
            for (b, &x) in buf.iter_mut().zip(v.trace(s, r)) {
                *b = C64::new(x, 0.0);
            }
            fft.process(&mut buf);
            for (k, slice) in cube.slices.iter_mut().enumerate() {
                slice[(s, r)] = buf[k];
            }
        }
    }
    cube
}

pub fn inverse_time_fft(c: &FrequencyCube) -> Result<SeismicVolume> {
    let g = *c.geometry();
    if c.n_bins() != g.n_bins() {
        return Err(Error::arg("bin count inconsistent with geometry"));
    }
    let (n, nt) = (g.n(), g.n_time);
    let half = nt / 2;
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(nt);
    let mut out = SeismicVolume::zeros(g);
    let mut buf = vec![C64::new(0.0, 0.0); nt];
    let scale = 1.0 / nt as f64;
    let mut worst_imag: f64 = 0.0;
    for s in 0..n {
        for r in 0..n {
            for (k, b) in buf.iter_mut().enumerate() {
                *b = if k <= half { c.slices[k][(s, r)] } else { c.slices[nt - k][(s, r)].conj() };
            }
            ifft.process(&mut buf);
            for (y, z) in out.trace_mut(s, r).iter_mut().zip(&buf) {
                *y = real_part(z, scale, &mut worst_imag);
            }
        }
    }
    if worst_imag > 0.0 {
        log::trace!("discarded imaginary residue up to {worst_imag:.3e}");
    }
    Ok(out)
}

#[inline]
fn real_part(z: &C64, scale: f64, worst: &mut f64) -> f64 {
    *worst = worst.max((z.im * scale).abs());
    z.re * scale
}

/// Passband `[f_lo, f_hi]` with raised-cosine tapers of width `transition`
/// placed outside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandpassSpec {
    pub f_lo: f64,
    pub f_hi: f64,
    pub transition: f64,
}

impl BandpassSpec {
    pub fn new(f_lo: f64, f_hi: f64, transition: f64) -> Result<Self> {
        if !(transition >= 0.0) || !(f_lo - transition >= 0.0) || !(f_lo < f_hi) {
            return Err(Error::arg(format!(
                "invalid bandpass {f_lo}:{f_hi} Hz with transition {transition} Hz"
            )));
        }
        Ok(BandpassSpec { f_lo, f_hi, transition })
    }

    /// Gain in `[0, 1]` at `f` hertz.
    pub fn response(&self, f: f64) -> f64 {
        let t = self.transition;
        let (lo_edge, hi_edge) = (self.f_lo - t, self.f_hi + t);
        if (self.f_lo..=self.f_hi).contains(&f) {
            1.0
        } else if f <= lo_edge || f >= hi_edge {
            0.0
        } else if f < self.f_lo {
            0.5 * (1.0 - (PI * (f - lo_edge) / t).cos())
        } else {
            0.5 * (1.0 - (PI * (hi_edge - f) / t).cos())
        }
    }
}

pub fn bandpass_response(f: f64, bp: &BandpassSpec) -> f64 {
    bp.response(f)
}

pub fn apply_bandpass(v: &SeismicVolume, bp: &BandpassSpec) -> SeismicVolume {
    let mut cube = forward_time_fft(v);
    for k in 0..cube.n_bins() {
        let gain = bp.response(cube.freq(k));
        if gain != 1.0 {
            *cube.bin_matrix_mut(k) *= C64::new(gain, 0.0);
        }
    }
    inverse_time_fft(&cube).expect("cube built from the same geometry")
}

/// `20·log₁₀(‖truth‖ / ‖residual‖)` from precomputed norms.
pub fn snr_from_norms(signal: f64, residual: f64) -> Result<f64> {
    if !(signal > 0.0) {
        return Err(Error::arg("S/R needs a non-zero reference"));
    }
    if residual == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok(20.0 * (signal / residual).log10())
}

pub fn snr_db(truth: &[f64], test: &[f64]) -> Result<f64> {
    if truth.len() != test.len() {
        return Err(Error::arg("S/R operands differ in length"));
    }
    let signal = truth.iter().map(|x| x * x).sum::<f64>().sqrt();
    let residual = truth.iter().zip(test).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    snr_from_norms(signal, residual)
}

pub fn snr_db_volume(truth: &SeismicVolume, test: &SeismicVolume) -> Result<f64> {
    if truth.geometry() != test.geometry() {
        return Err(Error::arg("S/R operands have different geometries"));
    }
    snr_db(truth.samples(), test.samples())
}

pub fn snr_db_matrix(truth: &CMatrix, test: &CMatrix) -> Result<f64> {
    if truth.shape() != test.shape() {
        return Err(Error::arg("S/R operands differ in shape"));
    }
    snr_from_norms(truth.norm(), (truth - test).norm())
}
