//! Acquisition geometry, time-domain volumes, frequency slices and the
//! source–receiver ↔ midpoint–offset index mapping for a 2D line.
//!
//! For an `n × n` source/receiver grid the midpoint–offset (MH) slice is a
//! dense `(2n−1) × (2n−1)` matrix with
//!
//! ```text
//! m = s + r
//! h = s − r + (n − 1)
//! ```
//!
//! Only cells with `(m + h) ≡ (n − 1) (mod 2)` that land inside the grid are
//! valid; every other cell is kept at zero.

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub n_sources: usize,
    pub n_receivers: usize,
    pub n_time: usize,
    /// Time sampling interval in seconds.
    pub dt: f64,
    /// Source spacing in meters.
    pub d_src: f64,
    /// Receiver spacing in meters.
    pub d_rcv: f64,
}

impl GridGeometry {
    pub fn new(
        n_sources: usize,
        n_receivers: usize,
        n_time: usize,
        dt: f64,
        d_src: f64,
        d_rcv: f64,
    ) -> Result<Self> {
        let g = GridGeometry { n_sources, n_receivers, n_time, dt, d_src, d_rcv };
        g.validate()?;
        Ok(g)
    }

    /// Square line with equal source and receiver spacing.
    pub fn square(n: usize, n_time: usize, dt: f64, spacing: f64) -> Result<Self> {
        Self::new(n, n, n_time, dt, spacing, spacing)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sources == 0 {
            return Err(Error::arg("geometry needs at least one source"));
        }
        if self.n_sources != self.n_receivers {
            return Err(Error::arg(format!(
                "only square lines are supported (n_sources = {}, n_receivers = {})",
                self.n_sources, self.n_receivers
            )));
        }
        if self.n_time < 2 {
            return Err(Error::arg(format!("n_time must be >= 2, got {}", self.n_time)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::arg(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.d_src.is_finite() && self.d_rcv.is_finite()) {
            return Err(Error::arg("spacings must be finite"));
        }
        Ok(())
    }

    /// Sources per side of the (square) line.
    pub fn n(&self) -> usize {
        self.n_sources
    }

    /// Side length of a midpoint–offset slice.
    pub fn mh_dim(&self) -> usize {
        2 * self.n_sources - 1
    }

    pub fn n_samples(&self) -> usize {
        self.n_sources * self.n_receivers * self.n_time
    }

    pub fn nyquist(&self) -> f64 {
        0.5 / self.dt
    }

    /// Spacing between discrete frequency bins.
    pub fn df(&self) -> f64 {
        1.0 / (self.n_time as f64 * self.dt)
    }

    /// Number of non-negative frequency bins of a real-input transform.
    pub fn n_bins(&self) -> usize {
        self.n_time / 2 + 1
    }
}

/// Time-domain data cube indexed `(source, receiver, time)`, time fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SeismicVolume {
    geometry: GridGeometry,
    samples: Vec<f64>,
}

impl SeismicVolume {
    pub fn new(geometry: GridGeometry, samples: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        if samples.len() != geometry.n_samples() {
            return Err(Error::arg(format!(
                "sample count {} does not match geometry ({} expected)",
                samples.len(),
                geometry.n_samples()
            )));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::arg(format!("non-finite sample at flat index {i}")));
        }
        Ok(SeismicVolume { geometry, samples })
    }

    pub fn zeros(geometry: GridGeometry) -> Self {
        SeismicVolume { geometry, samples: vec![0.0; geometry.n_samples()] }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    fn trace_offset(&self, s: usize, r: usize) -> usize {
        (s * self.geometry.n_receivers + r) * self.geometry.n_time
    }

    pub fn trace(&self, s: usize, r: usize) -> &[f64] {
        let o = self.trace_offset(s, r);
        &self.samples[o..o + self.geometry.n_time]
    }

    pub fn trace_mut(&mut self, s: usize, r: usize) -> &mut [f64] {
        let o = self.trace_offset(s, r);
        let nt = self.geometry.n_time;
        &mut self.samples[o..o + nt]
    }

    pub fn get(&self, s: usize, r: usize, t: usize) -> f64 {
        self.samples[self.trace_offset(s, r) + t]
    }

    pub fn norm(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceDomain {
    SourceReceiver,
    MidpointOffset,
}

/// One temporal-frequency component of a line.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySlice {
    pub freq_hz: f64,
    pub domain: SliceDomain,
    pub values: CMatrix,
}

impl FrequencySlice {
    pub fn source_receiver(freq_hz: f64, values: CMatrix) -> Result<Self> {
        if !values.is_square() || values.nrows() == 0 {
            return Err(Error::arg(format!(
                "source-receiver slice must be square and non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        Ok(FrequencySlice { freq_hz, domain: SliceDomain::SourceReceiver, values })
    }

    pub fn midpoint_offset(freq_hz: f64, values: CMatrix) -> Result<Self> {
        if !values.is_square() || values.nrows() % 2 == 0 {
            return Err(Error::arg(format!(
                "midpoint-offset slice must be square with odd side, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        Ok(FrequencySlice { freq_hz, domain: SliceDomain::MidpointOffset, values })
    }

    /// Line size `n` the slice belongs to.
    pub fn line_size(&self) -> usize {
        match self.domain {
            SliceDomain::SourceReceiver => self.values.nrows(),
            SliceDomain::MidpointOffset => (self.values.nrows() + 1) / 2,
        }
    }
}

/// Maps a source/receiver pair to its midpoint/offset cell.
pub fn sr_to_mh_index(s: usize, r: usize, n: usize) -> Result<(usize, usize)> {
    if s >= n || r >= n {
        return Err(Error::arg(format!("index (s={s}, r={r}) out of range for n={n}")));
    }
    Ok((s + r, s + n - 1 - r))
}

/// Inverse of [`sr_to_mh_index`]; `None` for cells with no source/receiver pair.
pub fn mh_to_sr_index(m: usize, h: usize, n: usize) -> Option<(usize, usize)> {
    if n == 0 || m > 2 * n - 2 || h > 2 * n - 2 {
        return None;
    }
    let shift = n - 1;
    let two_s = (m + h).checked_sub(shift)?;
    let two_r = (m + shift).checked_sub(h)?;
    if two_s % 2 != 0 {
        return None;
    }
    let (s, r) = (two_s / 2, two_r / 2);
    (s < n && r < n).then_some((s, r))
}

/// Whether `(m, h)` corresponds to a source/receiver pair.
pub fn is_valid_mh_cell(m: usize, h: usize, n: usize) -> bool {
    mh_to_sr_index(m, h, n).is_some()
}

/// Scatters an `n × n` matrix into a zero-filled `(2n−1) × (2n−1)` one.
pub fn embed_matrix(sr: &CMatrix) -> Result<CMatrix> {
    if !sr.is_square() || sr.nrows() == 0 {
        return Err(Error::arg(format!(
            "embed expects a non-empty square matrix, got {}x{}",
            sr.nrows(),
            sr.ncols()
        )));
    }
    let n = sr.nrows();
    let mut mh = CMatrix::zeros(2 * n - 1, 2 * n - 1);
    for s in 0..n {
        for r in 0..n {
            mh[(s + r, s + n - 1 - r)] = sr[(s, r)];
        }
    }
    Ok(mh)
}

/// Gathers the valid cells of a `(2n−1) × (2n−1)` matrix into `n × n`.
pub fn extract_matrix(mh: &CMatrix) -> Result<CMatrix> {
    if !mh.is_square() || mh.nrows() % 2 == 0 {
        return Err(Error::arg(format!(
            "extract expects an odd square matrix, got {}x{}",
            mh.nrows(),
            mh.ncols()
        )));
    }
    let n = (mh.nrows() + 1) / 2;
    Ok(CMatrix::from_fn(n, n, |s, r| mh[(s + r, s + n - 1 - r)]))
}

/// Zeroes every invalid-parity or out-of-grid cell of an MH matrix.
pub fn mask_invalid_cells(mh: &CMatrix) -> Result<CMatrix> {
    embed_matrix(&extract_matrix(mh)?)
}

pub fn embed_sr_to_mh(slice: &FrequencySlice) -> Result<FrequencySlice> {
    if slice.domain != SliceDomain::SourceReceiver {
        return Err(Error::arg("embed expects a source-receiver slice"));
    }
    FrequencySlice::midpoint_offset(slice.freq_hz, embed_matrix(&slice.values)?)
}

pub fn extract_mh_to_sr(slice: &FrequencySlice) -> Result<FrequencySlice> {
    if slice.domain != SliceDomain::MidpointOffset {
        return Err(Error::arg("extract expects a midpoint-offset slice"));
    }
    FrequencySlice::source_receiver(slice.freq_hz, extract_matrix(&slice.values)?)
}
