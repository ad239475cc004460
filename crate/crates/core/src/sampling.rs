//! Jittered source subsampling and the sampling operator.
//!
//! The operator keeps whole receiver gathers for every observed source and
//! reads them straight out of a midpoint–offset slice, so it never touches
//! invalid-parity cells.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datamodel::{sr_to_mh_index, FrequencySlice, SliceDomain};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};

/// Set of observed source positions drawn one per bin of `factor` sources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceMask {
    n_sources: usize,
    factor: usize,
    kept: Vec<usize>,
}

impl SourceMask {
    /// Draws one uniformly random source per contiguous bin of `factor`
    /// sources using a ChaCha8 stream seeded with `seed`. The last bin may be
    /// shorter.
    pub fn jittered(n_sources: usize, factor: usize, seed: u64) -> Result<Self> {
        if n_sources == 0 {
            return Err(Error::arg("mask needs at least one source"));
        }
        if factor == 0 || factor > n_sources {
            return Err(Error::arg(format!(
                "subsampling factor must be in 1..={n_sources}, got {factor}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kept = (0..n_sources)
            .step_by(factor)
            .map(|start| {
                let end = (start + factor).min(n_sources);
                rng.random_range(start..end)
            })
            .collect();
        Ok(SourceMask { n_sources, factor, kept })
    }

    /// Builds a mask from explicit indices, checking the jitter invariants.
    pub fn from_parts(n_sources: usize, factor: usize, kept: Vec<usize>) -> Result<Self> {
        if n_sources == 0 || factor == 0 || factor > n_sources {
            return Err(Error::arg(format!(
                "invalid mask header: n_sources = {n_sources}, factor = {factor}"
            )));
        }
        let n_bins = n_sources.div_ceil(factor);
        if kept.len() != n_bins {
            return Err(Error::arg(format!(
                "mask must keep exactly one source per bin ({n_bins} bins, {} kept)",
                kept.len()
            )));
        }
        for (k, &idx) in kept.iter().enumerate() {
            let (lo, hi) = (k * factor, ((k + 1) * factor).min(n_sources));
            if !(lo..hi).contains(&idx) {
                return Err(Error::arg(format!(
                    "kept source {idx} is not inside bin {k} = [{lo}, {hi})"
                )));
            }
        }
        Ok(SourceMask { n_sources, factor, kept })
    }

    /// Mask observing every source.
    pub fn full(n_sources: usize) -> Result<Self> {
        Self::from_parts(n_sources, 1, (0..n_sources).collect())
    }

    pub fn n_sources(&self) -> usize {
        self.n_sources
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    /// Largest difference between consecutive kept indices (0 for one source).
    pub fn max_gap(&self) -> usize {
        self.kept.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    /// Text form: `n_sources factor`, then one kept index per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n_sources, self.factor);
        for k in &self.kept {
            writeln!(out, "{k}").unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| Error::Format("empty mask file".into()))?;
        let mut fields = header.split_whitespace();
        let mut header_field = |name: &str| -> Result<usize> {
            fields
                .next()
                .ok_or_else(|| Error::Format(format!("mask header is missing {name}")))?
                .parse()
                .map_err(|e| Error::Format(format!("bad {name} in mask header: {e}")))
        };
        let n_sources = header_field("n_sources")?;
        let factor = header_field("factor")?;
        let kept = lines
            .map(|l| l.parse().map_err(|e| Error::Format(format!("bad mask index {l:?}: {e}"))))
            .collect::<Result<Vec<usize>>>()?;
        if kept.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Format("mask indices must be strictly increasing".into()));
        }
        Self::from_parts(n_sources, factor, kept).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Observed monochromatic data `b`, ordered `k · n_receivers + r` for the
/// `k`-th kept source.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedData {
    pub freq_hz: f64,
    pub n_receivers: usize,
    pub values: Vec<C64>,
}

impl ObservedData {
    pub fn norm(&self) -> f64 {
        crate::linalg::vec_norm(&self.values)
    }
}

/// The linear map from an MH slice to the observed data, with its adjoint.
#[derive(Debug, Clone)]
pub struct SamplingOperator {
    n: usize,
    /// MH cell read by each observation, in data order.
    cells: Vec<(usize, usize)>,
}

impl SamplingOperator {
    pub fn new(mask: &SourceMask, n: usize) -> Result<Self> {
        if mask.n_sources() != n {
            return Err(Error::arg(format!(
                "mask covers {} sources but the line has {n}",
                mask.n_sources()
            )));
        }
        let mut cells = Vec::with_capacity(mask.kept().len() * n);
        for &s in mask.kept() {
            for r in 0..n {
                cells.push(sr_to_mh_index(s, r, n)?);
            }
        }
        Ok(SamplingOperator { n, cells })
    }

    pub fn line_size(&self) -> usize {
        self.n
    }

    pub fn mh_dim(&self) -> usize {
        2 * self.n - 1
    }

    pub fn n_observations(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    fn check_mh(&self, x: &CMatrix) -> Result<()> {
        let d = self.mh_dim();
        if x.shape() != (d, d) {
            return Err(Error::arg(format!(
                "expected a {d}x{d} midpoint-offset matrix, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        Ok(())
    }

    /// Gathers the observed cells of a dense MH matrix.
    pub fn apply(&self, x: &CMatrix) -> Result<Vec<C64>> {
        self.check_mh(x)?;
        Ok(self.cells.iter().map(|&c| x[c]).collect())
    }

    /// Samples `left · rightᴴ` without forming the product.
    pub fn apply_factored(&self, left: &CMatrix, right: &CMatrix) -> Result<Vec<C64>> {
        let d = self.mh_dim();
        if left.nrows() != d || right.nrows() != d || left.ncols() != right.ncols() {
            return Err(Error::arg(format!(
                "factor shapes {:?} and {:?} do not fit a {d}x{d} slice",
                left.shape(),
                right.shape()
            )));
        }
        let rank = left.ncols();
        Ok(self
            .cells
            .iter()
            .map(|&(m, h)| (0..rank).map(|j| left[(m, j)] * right[(h, j)].conj()).sum())
            .collect())
    }

    /// Scatters data back onto a zero MH matrix.
    pub fn adjoint(&self, b: &[C64]) -> Result<CMatrix> {
        self.check_len(b)?;
        let d = self.mh_dim();
        let mut x = CMatrix::zeros(d, d);
        for (&c, &v) in self.cells.iter().zip(b) {
            x[c] += v;
        }
        Ok(x)
    }

    /// `adjoint(b) · m` evaluated sparsely.
    pub fn adjoint_times(&self, b: &[C64], m: &CMatrix) -> Result<CMatrix> {
        self.check_len(b)?;
        let mut out = CMatrix::zeros(self.mh_dim(), m.ncols());
        for (&(row, col), &v) in self.cells.iter().zip(b) {
            for j in 0..m.ncols() {
                out[(row, j)] += v * m[(col, j)];
            }
        }
        Ok(out)
    }

    /// `adjoint(b)ᴴ · m` evaluated sparsely.
    pub fn adjoint_conj_times(&self, b: &[C64], m: &CMatrix) -> Result<CMatrix> {
        self.check_len(b)?;
        let mut out = CMatrix::zeros(self.mh_dim(), m.ncols());
        for (&(row, col), &v) in self.cells.iter().zip(b) {
            let vc = v.conj();
            for j in 0..m.ncols() {
                out[(col, j)] += vc * m[(row, j)];
            }
        }
        Ok(out)
    }

    fn check_len(&self, b: &[C64]) -> Result<()> {
        if b.len() != self.cells.len() {
            return Err(Error::arg(format!(
                "data length {} does not match the {} observed cells",
                b.len(),
                self.cells.len()
            )));
        }
        Ok(())
    }
}

/// Samples an MH slice at the observed source positions.
pub fn sample(x: &FrequencySlice, mask: &SourceMask) -> Result<ObservedData> {
    if x.domain != SliceDomain::MidpointOffset {
        return Err(Error::arg("sampling expects a midpoint-offset slice"));
    }
    let n = x.line_size();
    let op = SamplingOperator::new(mask, n)?;
    Ok(ObservedData { freq_hz: x.freq_hz, n_receivers: n, values: op.apply(&x.values)? })
}

/// Adjoint of [`sample`]: observed values scattered onto a zero MH slice.
pub fn sample_adjoint(b: &ObservedData, mask: &SourceMask, n: usize) -> Result<FrequencySlice> {
    if b.n_receivers != n {
        return Err(Error::arg(format!(
            "data has {} receivers per gather, line has {n}",
            b.n_receivers
        )));
    }
    let op = SamplingOperator::new(mask, n)?;
    FrequencySlice::midpoint_offset(b.freq_hz, op.adjoint(&b.values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{embed_matrix, is_valid_mh_cell};
    use crate::linalg::{complex_gaussian, inner, random_matrix};

    fn check_invariants(mask: &SourceMask) {
        let (n, g) = (mask.n_sources(), mask.factor());
        let kept = mask.kept();
        assert!(kept.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(kept.len(), n.div_ceil(g));
        for (k, &i) in kept.iter().enumerate() {
            assert!(i >= k * g && i < ((k + 1) * g).min(n));
        }
        assert!(mask.max_gap() < 2 * g);
    }

    #[test]
    fn factor_one_keeps_everything() {
        let m = SourceMask::jittered(8, 1, 99).unwrap();
        assert_eq!(m.kept(), &[0, 1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn factor_four_on_eight() {
        for seed in 0..50 {
            let m = SourceMask::jittered(8, 4, seed).unwrap();
            assert_eq!(m.kept().len(), 2);
            assert!(m.kept()[0] < 4 && (4..8).contains(&m.kept()[1]));
            assert!(m.max_gap() <= 7);
        }
    }

    #[test]
    fn jitter_invariants_over_many_seeds() {
        for &g in &[2usize, 3, 4, 6] {
            for seed in 0..1000 {
                check_invariants(&SourceMask::jittered(355, g, seed).unwrap());
            }
        }
    }

    #[test]
    fn jitter_is_deterministic_and_seed_sensitive() {
        let a = SourceMask::jittered(355, 4, 11).unwrap();
        assert_eq!(a, SourceMask::jittered(355, 4, 11).unwrap());
        assert_ne!(a, SourceMask::jittered(355, 4, 12).unwrap());
    }

    #[test]
    fn factor_out_of_range() {
        assert!(SourceMask::jittered(4, 5, 0).is_err());
        assert!(SourceMask::jittered(4, 0, 0).is_err());
        assert!(SourceMask::jittered(0, 1, 0).is_err());
    }

    #[test]
    fn text_round_trip_and_rejections() {
        let m = SourceMask::jittered(30, 4, 3).unwrap();
        assert_eq!(SourceMask::parse(&m.to_text()).unwrap(), m);
        assert!(SourceMask::parse("").is_err());
        assert!(SourceMask::parse("8 4\n1\n").is_err());
        assert!(SourceMask::parse("8 4\n5\n1\n").is_err());
        assert!(SourceMask::parse("8 4\n1\nx\n").is_err());
        assert!(SourceMask::parse("8 4\n1\n3\n").is_err());
    }

    #[test]
    fn full_mask_gathers_every_valid_cell_once() {
        let n = 6;
        let op = SamplingOperator::new(&SourceMask::full(n).unwrap(), n).unwrap();
        let mut cells = op.cells().to_vec();
        cells.sort();
        cells.dedup();
        assert_eq!(cells.len(), n * n);
        assert!(cells.iter().all(|&(m, h)| is_valid_mh_cell(m, h, n)));
    }

    #[test]
    fn sample_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 8;
        let mask = SourceMask::jittered(n, 2, 1).unwrap();
        let op = SamplingOperator::new(&mask, n).unwrap();
        let x = random_matrix(15, 15, &mut rng);
        let y = random_matrix(15, 15, &mut rng);
        let (a, b) = (complex_gaussian(&mut rng), complex_gaussian(&mut rng));
        let combined = op.apply(&(&x * a + &y * b)).unwrap();
        let sx = op.apply(&x).unwrap();
        let sy = op.apply(&y).unwrap();
        for i in 0..combined.len() {
            assert!((combined[i] - (a * sx[i] + b * sy[i])).norm() < 1e-12);
        }
        assert!(op.apply(&CMatrix::zeros(15, 15)).unwrap().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn adjoint_dot_product_and_gather_scatter() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for trial in 0..20 {
            let n = if trial % 2 == 0 { 8 } else { 32 };
            let mask = SourceMask::jittered(n, 1 + trial % 4, trial as u64).unwrap();
            let op = SamplingOperator::new(&mask, n).unwrap();
            let x = random_matrix(2 * n - 1, 2 * n - 1, &mut rng);
            let y: Vec<C64> = (0..op.n_observations()).map(|_| complex_gaussian(&mut rng)).collect();
            let lhs = inner(&op.apply(&x).unwrap(), &y);
            let aty = op.adjoint(&y).unwrap();
            let rhs: C64 = x.iter().zip(aty.iter()).map(|(a, b)| a.conj() * b).sum();
            let scale = x.norm() * crate::linalg::vec_norm(&y);
            assert!((lhs - rhs).norm() <= 1e-10 * scale);
            assert_eq!(op.apply(&aty).unwrap(), y);
        }
    }

    #[test]
    fn adjoint_of_zero_and_length_mismatch() {
        let mask = SourceMask::jittered(5, 2, 0).unwrap();
        let op = SamplingOperator::new(&mask, 5).unwrap();
        let z = op.adjoint(&vec![C64::new(0.0, 0.0); op.n_observations()]).unwrap();
        assert!(z.iter().all(|v| v.norm() == 0.0));
        assert!(op.adjoint(&[C64::new(1.0, 0.0)]).is_err());
        assert!(SamplingOperator::new(&mask, 6).is_err());
    }

    #[test]
    fn factored_and_sparse_products_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 7;
        let mask = SourceMask::jittered(n, 3, 2).unwrap();
        let op = SamplingOperator::new(&mask, n).unwrap();
        let l = random_matrix(13, 3, &mut rng);
        let r = random_matrix(13, 3, &mut rng);
        let dense = op.apply(&(&l * r.adjoint())).unwrap();
        let fact = op.apply_factored(&l, &r).unwrap();
        for (a, b) in dense.iter().zip(&fact) {
            assert!((a - b).norm() < 1e-12);
        }
        let g = op.adjoint(&fact).unwrap();
        assert!(crate::linalg::max_abs_diff(&op.adjoint_times(&fact, &r).unwrap(), &(&g * &r)) < 1e-12);
        assert!(
            crate::linalg::max_abs_diff(&op.adjoint_conj_times(&fact, &l).unwrap(), &(g.adjoint() * &l))
                < 1e-12
        );
    }

    #[test]
    fn slice_level_sample_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 6;
        let mask = SourceMask::jittered(n, 2, 9).unwrap();
        let x = FrequencySlice::midpoint_offset(12.0, embed_matrix(&random_matrix(n, n, &mut rng)).unwrap())
            .unwrap();
        let b = sample(&x, &mask).unwrap();
        assert_eq!(b.values.len(), 3 * n);
        let back = sample_adjoint(&b, &mask, n).unwrap();
        assert_eq!(sample(&back, &mask).unwrap(), b);
        // observed row k of the gather is source kept[k]
        let k = 1;
        let s = mask.kept()[k];
        for r in 0..n {
            let (m, h) = sr_to_mh_index(s, r, n).unwrap();
            assert_eq!(b.values[k * n + r], x.values[(m, h)]);
        }
    }
}
