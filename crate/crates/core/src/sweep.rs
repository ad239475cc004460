//! Low-to-high frequency recovery where each slice is weighted by the
//! subspaces of the slice recovered just below it.
//!
//! Weight operators keep their full `(2n−1)` dimension regardless of how
//! many prior singular vectors they carry, so the prior rank `r_s` can be
//! chosen independently of the factorization rank `r`. Using `r_s < r`
//! (limited subspace) keeps a high-rank factorization from feeding its
//! overfit components into the next slice's prior.

use nalgebra::DMatrix;

use crate::datamodel::{mask_invalid_cells, FrequencySlice, GridGeometry, SliceDomain};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::sampling::{ObservedData, SamplingOperator, SourceMask};
use crate::solver::{solve_slice, FactorPair, SolveError, SolveParams, SolveStats};
use crate::spectral::snr_db_matrix;
use crate::weights::{Subspace, WeightOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepMode {
    /// Every slice solved independently with identity weights.
    Plain,
    /// Priors carry all `r` singular vectors of the previous slice.
    ConventionalWeighted,
    /// Priors carry only the top `r_s` singular vectors.
    LimitedSubspace,
}

impl SweepMode {
    pub fn label(&self) -> &'static str {
        match self {
            SweepMode::Plain => "plain",
            SweepMode::ConventionalWeighted => "weighted",
            SweepMode::LimitedSubspace => "limited",
        }
    }
}

impl std::str::FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(SweepMode::Plain),
            "weighted" => Ok(SweepMode::ConventionalWeighted),
            "limited" => Ok(SweepMode::LimitedSubspace),
            other => Err(Error::arg(format!("unknown mode {other:?}"))),
        }
    }
}

/// Sweep settings. The factorization rank is `solve.rank`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub f_min: f64,
    pub f_max: f64,
    pub subspace_rank: usize,
    pub weight: f64,
    pub mode: SweepMode,
    pub solve: SolveParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            f_min: 7.0,
            f_max: 74.0,
            subspace_rank: 25,
            weight: 0.5,
            mode: SweepMode::LimitedSubspace,
            solve: SolveParams::default(),
        }
    }
}

impl SweepConfig {
    pub fn rank(&self) -> usize {
        self.solve.rank
    }

    /// Number of prior singular vectors used to build the next weights.
    pub fn prior_rank(&self) -> Option<usize> {
        match self.mode {
            SweepMode::Plain => None,
            SweepMode::ConventionalWeighted => Some(self.solve.rank),
            SweepMode::LimitedSubspace => Some(self.subspace_rank),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.solve.rank == 0 {
            return Err(Error::arg("rank must be >= 1"));
        }
        if self.mode == SweepMode::LimitedSubspace
            && !(1..=self.solve.rank).contains(&self.subspace_rank)
        {
            return Err(Error::arg(format!(
                "subspace rank {} must lie in 1..={}",
                self.subspace_rank, self.solve.rank
            )));
        }
        if !(self.weight > 0.0 && self.weight <= 1.0) {
            return Err(Error::arg(format!("weight must lie in (0, 1], got {}", self.weight)));
        }
        if !(self.f_min < self.f_max) {
            return Err(Error::arg(format!(
                "band [{}, {}] Hz is empty",
                self.f_min, self.f_max
            )));
        }
        Ok(())
    }
}

/// One recovered frequency, factors in the physical (unweighted) variables.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredSlice {
    pub freq_hz: f64,
    pub factors: FactorPair,
    pub snr_db: Option<f64>,
    pub stats: SolveStats,
}

impl RecoveredSlice {
    /// Dense MH slice with invalid cells zeroed.
    pub fn to_mh(&self) -> Result<FrequencySlice> {
        FrequencySlice::midpoint_offset(self.freq_hz, mask_invalid_cells(&self.factors.product())?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredBand {
    pub geometry: GridGeometry,
    pub slices: Vec<RecoveredSlice>,
}

impl RecoveredBand {
    pub fn frequencies(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.freq_hz).collect()
    }
}

/// Sweep failure with everything recovered before the failing slice.
#[derive(Debug, thiserror::Error)]
#[error("recovery failed at {freq_hz} Hz (slice {index}): {source}")]
pub struct SweepError {
    pub index: usize,
    pub freq_hz: f64,
    pub partial: Option<RecoveredBand>,
    #[source]
    pub source: SolveError,
}

impl SweepError {
    fn setup(e: Error) -> Self {
        SweepError { index: 0, freq_hz: f64::NAN, partial: None, source: SolveError::Setup(e) }
    }
}

/// Top-`k` singular triplets of `L·Rᴴ` from thin QR factorizations of the
/// factors and an `r × r` SVD, without forming the product.
pub fn factored_svd(
    left: &CMatrix,
    right: &CMatrix,
    k: usize,
) -> Result<(Subspace, Vec<f64>, Subspace)> {
    let r = left.ncols();
    if right.ncols() != r || k == 0 || k > r {
        return Err(Error::arg(format!("cannot take {k} singular vectors of a rank-{r} pair")));
    }
    if left.nrows() < r || right.nrows() < r {
        return Err(Error::arg("factors must have at least as many rows as columns"));
    }
    let (ql, tl) = left.clone().qr().unpack();
    let (qr, tr) = right.clone().qr().unpack();
    let core = tl * tr.adjoint();
    let svd = core.svd(true, true);
    let (u_small, v_small_t) = (svd.u.expect("requested U"), svd.v_t.expect("requested Vᴴ"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let keep = &order[..k];

    let pick_u = DMatrix::from_fn(r, k, |i, j| u_small[(i, keep[j])]);
    let pick_v = DMatrix::from_fn(r, k, |i, j| v_small_t[(keep[j], i)].conj());
    let sigma = keep.iter().map(|&i| svd.singular_values[i]).collect();
    Ok((Subspace::new(ql * pick_u)?, sigma, Subspace::new(qr * pick_v)?))
}

/// Maps barred factors back: `L_x = Q⁻¹·L̄`, `R_x = W⁻¹·R̄`.
pub fn unweight_solution(
    f: &FactorPair,
    q: &WeightOperator,
    w: &WeightOperator,
) -> Result<FactorPair> {
    FactorPair::new(q.apply(&f.left, true)?, w.apply(&f.right, true)?)
}

/// Recovers each observed slice in ascending frequency order.
///
/// The first slice always uses identity weights. Afterwards, depending on
/// the mode, the next slice is weighted by the top singular subspaces of
/// the slice just recovered. When `truth` is supplied (MH slices aligned
/// with `observed`) each slice records its S/R over the valid cells.
pub fn recover_band(
    observed: &[ObservedData],
    mask: &SourceMask,
    geometry: &GridGeometry,
    cfg: &SweepConfig,
    truth: Option<&[FrequencySlice]>,
) -> Result<RecoveredBand, SweepError> {
    cfg.validate().map_err(SweepError::setup)?;
    if observed.is_empty() {
        return Err(SweepError::setup(Error::arg("no frequencies to recover")));
    }
    if observed.windows(2).any(|w| w[0].freq_hz >= w[1].freq_hz) {
        return Err(SweepError::setup(Error::arg("frequencies must be strictly increasing")));
    }
    if let Some(t) = truth {
        if t.len() != observed.len() || t.iter().any(|s| s.domain != SliceDomain::MidpointOffset) {
            return Err(SweepError::setup(Error::arg(
                "truth must hold one midpoint-offset slice per observed frequency",
            )));
        }
    }
    let sampling = SamplingOperator::new(mask, geometry.n()).map_err(SweepError::setup)?;
    let dim = sampling.mh_dim();

    let mut q = WeightOperator::identity(dim);
    let mut w = WeightOperator::identity(dim);
    let mut band = RecoveredBand { geometry: *geometry, slices: Vec::with_capacity(observed.len()) };

    for (i, obs) in observed.iter().enumerate() {
        let fail = |band: &RecoveredBand, source: SolveError| SweepError {
            index: i,
            freq_hz: obs.freq_hz,
            partial: Some(band.clone()),
            source,
        };
        let params = SolveParams { seed: cfg.solve.seed.wrapping_add(i as u64), ..cfg.solve.clone() };
        let (barred, stats) =
            solve_slice(&obs.values, &sampling, &q, &w, &params).map_err(|e| fail(&band, e))?;
        let factors = unweight_solution(&barred, &q, &w).map_err(|e| fail(&band, e.into()))?;
        let snr_db = match truth {
            Some(t) => {
                let rec = mask_invalid_cells(&factors.product()).map_err(|e| fail(&band, e.into()))?;
                Some(snr_db_matrix(&t[i].values, &rec).map_err(|e| fail(&band, e.into()))?)
            }
            None => None,
        };

        if let Some(k) = cfg.prior_rank() {
            let k = k.min(factors.rank());
            let (u, _, v) =
                factored_svd(&factors.left, &factors.right, k).map_err(|e| fail(&band, e.into()))?;
            q = WeightOperator::new(u, cfg.weight).map_err(|e| fail(&band, e.into()))?;
            w = WeightOperator::new(v, cfg.weight).map_err(|e| fail(&band, e.into()))?;
        }
        log::debug!(
            "{} {:.2} Hz: {} iterations, misfit {:.3e}{}",
            cfg.mode.label(),
            obs.freq_hz,
            stats.iterations,
            stats.final_misfit,
            snr_db.map(|s| format!(", S/R {s:.2} dB")).unwrap_or_default()
        );
        band.slices.push(RecoveredSlice { freq_hz: obs.freq_hz, factors, snr_db, stats });
    }
    Ok(band)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, random_matrix, singular_values, C64};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn projector(s: &Subspace) -> CMatrix {
        s.basis() * s.basis().adjoint()
    }

    #[test]
    fn factored_svd_of_unit_vectors() {
        let mut e1 = CMatrix::zeros(5, 1);
        e1[(0, 0)] = C64::new(1.0, 0.0);
        let (u, s, v) = factored_svd(&e1, &e1, 1).unwrap();
        assert!((s[0] - 1.0).abs() < 1e-14);
        assert!((u.basis()[(0, 0)].norm() - 1.0).abs() < 1e-14);
        assert!((v.basis()[(0, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn factored_svd_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..3 {
            let l = random_matrix(32, 6, &mut rng);
            let r = random_matrix(32, 6, &mut rng);
            let dense = &l * r.adjoint();
            let svd = dense.clone().svd(true, true);
            let mut order: Vec<usize> = (0..32).collect();
            order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
            let k = 4;
            let (u, s, v) = factored_svd(&l, &r, k).unwrap();
            let dense_sv = singular_values(&dense);
            for j in 0..k {
                assert!((s[j] - dense_sv[j]).abs() < 1e-10 * dense_sv[0]);
            }
            let du = DMatrix::from_fn(32, k, |i, j| svd.u.as_ref().unwrap()[(i, order[j])]);
            let dv = DMatrix::from_fn(32, k, |i, j| svd.v_t.as_ref().unwrap()[(order[j], i)].conj());
            assert!(max_abs_diff(&projector(&u), &(&du * du.adjoint())) < 1e-8);
            assert!(max_abs_diff(&projector(&v), &(&dv * dv.adjoint())) < 1e-8);
            let eye = CMatrix::identity(k, k);
            assert!(max_abs_diff(&u.basis().ad_mul(u.basis()), &eye) < 1e-10);
            assert!(max_abs_diff(&v.basis().ad_mul(v.basis()), &eye) < 1e-10);
        }
        let l = random_matrix(8, 2, &mut rng);
        assert!(factored_svd(&l, &l, 3).is_err());
    }

    #[test]
    fn unweight_matches_dense_and_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 11;
        let q = WeightOperator::new(Subspace::spanning(&random_matrix(d, 2, &mut rng)).unwrap(), 0.4)
            .unwrap();
        let w = WeightOperator::new(Subspace::spanning(&random_matrix(d, 3, &mut rng)).unwrap(), 0.7)
            .unwrap();
        let f = FactorPair::new(random_matrix(d, 3, &mut rng), random_matrix(d, 3, &mut rng)).unwrap();
        let x = unweight_solution(&f, &q, &w).unwrap();
        let dense = q.dense(true) * f.product() * w.dense(true);
        assert!(max_abs_diff(&x.product(), &dense) < 1e-10);
        let back = FactorPair::new(q.apply(&x.left, false).unwrap(), w.apply(&x.right, false).unwrap())
            .unwrap();
        assert!(max_abs_diff(&back.left, &f.left) < 1e-10);
        assert!(max_abs_diff(&back.right, &f.right) < 1e-10);
        let id = WeightOperator::identity(d);
        assert_eq!(unweight_solution(&f, &id, &id).unwrap(), f);
    }

    #[test]
    fn config_validation() {
        let ok = SweepConfig { subspace_rank: 4, ..SweepConfig::default() };
        assert!(ok.validate().is_ok());
        assert!(SweepConfig { subspace_rank: 90, ..ok.clone() }.validate().is_err());
        assert!(SweepConfig { subspace_rank: 0, ..ok.clone() }.validate().is_err());
        assert!(SweepConfig { weight: 0.0, ..ok.clone() }.validate().is_err());
        assert!(SweepConfig { f_min: 80.0, ..ok.clone() }.validate().is_err());
        assert_eq!("limited".parse::<SweepMode>().unwrap(), SweepMode::LimitedSubspace);
        assert!("other".parse::<SweepMode>().is_err());
    }

    #[test]
    fn rejects_empty_and_unsorted_input() {
        let g = GridGeometry::square(4, 16, 0.004, 10.0).unwrap();
        let mask = SourceMask::full(4).unwrap();
        let cfg = SweepConfig::default();
        assert!(recover_band(&[], &mask, &g, &cfg, None).is_err());
        let obs = |f: f64| ObservedData { freq_hz: f, n_receivers: 4, values: vec![C64::new(1.0, 0.0); 16] };
        assert!(recover_band(&[obs(10.0), obs(9.0)], &mask, &g, &cfg, None).is_err());
    }
}
