//! Subspace weight operators.
//!
//! A weight operator shrinks the directions of a prior subspace `U` by a
//! factor `w ∈ (0, 1]` and leaves the orthogonal complement untouched:
//!
//! ```text
//! Q   = w·U·Uᴴ + U⊥·U⊥ᴴ   = I − (1 − w)·U·Uᴴ
//! Q⁻¹ = U·Uᴴ/w + U⊥·U⊥ᴴ   = I + (1/w − 1)·U·Uᴴ
//! ```
//!
//! The complement `U⊥` is never formed; application costs
//! `O(dim · r_s · cols)`.

use crate::error::{Error, Result};
use crate::linalg::{nuclear_norm, orthonormal_columns, CMatrix, C64};
use crate::sampling::SamplingOperator;

/// Column deviation from orthonormality accepted without repair.
const ORTHO_TOL: f64 = 1e-8;
/// Deviation above which a basis is rejected instead of re-orthonormalized.
const REPAIR_LIMIT: f64 = 1e-3;

/// Matrix with orthonormal columns spanning a prior subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: CMatrix,
}

impl Subspace {
    /// Wraps a basis that is orthonormal up to small round-off. Bases that
    /// drift past `1e-8` are re-orthonormalized with a QR factorization.
    pub fn new(basis: CMatrix) -> Result<Self> {
        if basis.ncols() == 0 || basis.ncols() > basis.nrows() {
            return Err(Error::arg(format!(
                "subspace basis must be tall with at least one column, got {}x{}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        let dev = gram_deviation(&basis);
        if dev <= ORTHO_TOL {
            return Ok(Subspace { basis });
        }
        if dev > REPAIR_LIMIT || !dev.is_finite() {
            return Err(Error::arg(format!(
                "subspace basis is not orthonormal (max |BᴴB − I| = {dev:.3e})"
            )));
        }
        log::debug!("re-orthonormalizing subspace basis (deviation {dev:.3e})");
        Ok(Subspace { basis: orthonormal_columns(&basis) })
    }

    /// Orthonormal basis for the column span of an arbitrary full-rank matrix.
    pub fn spanning(m: &CMatrix) -> Result<Self> {
        Self::new(orthonormal_columns(m))
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }
}

fn gram_deviation(b: &CMatrix) -> f64 {
    let g = b.ad_mul(b);
    let mut dev: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((g[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    dev
}

/// Hermitian positive definite operator `I − (1 − w)·U·Uᴴ` on `C^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightOperator {
    dim: usize,
    subspace: Option<Subspace>,
    w: f64,
}

impl WeightOperator {
    pub fn identity(dim: usize) -> Self {
        WeightOperator { dim, subspace: None, w: 1.0 }
    }

    /// Builds the weight for `subspace` with shrink factor `w ∈ (0, 1]`.
    pub fn new(subspace: Subspace, w: f64) -> Result<Self> {
        check_weight(w)?;
        let dim = subspace.dim();
        if w == 1.0 {
            return Ok(Self::identity(dim));
        }
        Ok(WeightOperator { dim, subspace: Some(subspace), w })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight(&self) -> f64 {
        self.w
    }

    pub fn subspace(&self) -> Option<&Subspace> {
        self.subspace.as_ref()
    }

    pub fn is_identity(&self) -> bool {
        self.subspace.is_none()
    }

    fn coefficient(&self, inverted: bool) -> f64 {
        if inverted {
            1.0 / self.w - 1.0
        } else {
            self.w - 1.0
        }
    }

    /// `Q·M` (or `Q⁻¹·M` when `inverted`).
    pub fn apply(&self, m: &CMatrix, inverted: bool) -> Result<CMatrix> {
        if m.nrows() != self.dim {
            return Err(Error::arg(format!(
                "weight operator acts on {} rows, matrix has {}",
                self.dim,
                m.nrows()
            )));
        }
        let Some(sub) = &self.subspace else {
            return Ok(m.clone());
        };
        let u = sub.basis();
        let coeffs = u.ad_mul(m) * C64::new(self.coefficient(inverted), 0.0);
        Ok(m + u * coeffs)
    }

    /// `M·Q` (or `M·Q⁻¹`), using `M·Q = (Q·Mᴴ)ᴴ` for Hermitian `Q`.
    pub fn apply_right(&self, m: &CMatrix, inverted: bool) -> Result<CMatrix> {
        Ok(self.apply(&m.adjoint(), inverted)?.adjoint())
    }

    /// Dense materialization; intended for small test problems.
    pub fn dense(&self, inverted: bool) -> CMatrix {
        let eye = CMatrix::identity(self.dim, self.dim);
        match &self.subspace {
            None => eye,
            Some(sub) => {
                let u = sub.basis();
                eye + u * u.adjoint() * C64::new(self.coefficient(inverted), 0.0)
            }
        }
    }
}

fn check_weight(w: f64) -> Result<()> {
    if !(w > 0.0 && w <= 1.0) {
        return Err(Error::arg(format!("weight must lie in (0, 1], got {w}")));
    }
    Ok(())
}

/// Convenience constructor accepting an absent subspace.
pub fn make_weight(subspace: Option<Subspace>, w: f64, dim: usize) -> Result<WeightOperator> {
    check_weight(w)?;
    match subspace {
        None => Ok(WeightOperator::identity(dim)),
        Some(s) if s.dim() != dim => Err(Error::arg(format!(
            "subspace lives in C^{} but the operator acts on C^{dim}",
            s.dim()
        ))),
        Some(s) => WeightOperator::new(s, w),
    }
}

/// Outcome of comparing the weighted objective with its substituted form.
#[derive(Debug, Clone, Copy)]
pub struct SubstitutionCheck {
    /// `‖Q·X·W‖_*` with `Q`, `W` materialized densely.
    pub weighted_nuclear: f64,
    /// `‖X̄‖_*` with `X̄` built by the implicit operators.
    pub substituted_nuclear: f64,
    /// `max |𝒜(Q⁻¹·X̄·W⁻¹) − 𝒜(X)|` when a sampling operator is supplied.
    pub data_mismatch: Option<f64>,
}

/// Evaluates both sides of the variable substitution `X̄ = Q·X·W`: the
/// nuclear norm through dense weights and through the implicit operators,
/// and optionally the data predicted by mapping `X̄` back.
pub fn weighted_nuclear_identity_check(
    x: &CMatrix,
    q: &WeightOperator,
    w: &WeightOperator,
    sampling: Option<&SamplingOperator>,
) -> Result<SubstitutionCheck> {
    if x.nrows() != q.dim() || x.ncols() != w.dim() {
        return Err(Error::arg("matrix does not match weight dimensions"));
    }
    let weighted_nuclear = nuclear_norm(&(q.dense(false) * x * w.dense(false)));
    let x_bar = w.apply_right(&q.apply(x, false)?, false)?;
    let substituted_nuclear = nuclear_norm(&x_bar);
    let data_mismatch = match sampling {
        None => None,
        Some(op) => {
            let back = w.apply_right(&q.apply(&x_bar, true)?, true)?;
            let a = op.apply(&back)?;
            let b = op.apply(x)?;
            Some(a.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max))
        }
    };
    Ok(SubstitutionCheck { weighted_nuclear, substituted_nuclear, data_mismatch })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, random_matrix};
    use nalgebra::SymmetricEigen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_subspace(dim: usize, rank: usize, seed: u64) -> Subspace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Subspace::spanning(&random_matrix(dim, rank, &mut rng)).unwrap()
    }

    #[test]
    fn rejects_bad_weights() {
        let s = random_subspace(7, 2, 0);
        assert!(WeightOperator::new(s.clone(), 0.0).is_err());
        assert!(WeightOperator::new(s.clone(), 1.5).is_err());
        assert!(WeightOperator::new(s, -0.1).is_err());
        assert!(make_weight(None, 0.0, 7).is_err());
    }

    #[test]
    fn unit_weight_and_absent_subspace_are_identity() {
        let s = random_subspace(7, 3, 1);
        let op = WeightOperator::new(s, 1.0).unwrap();
        assert!(op.is_identity());
        assert_eq!(op.dense(false), CMatrix::identity(7, 7));
        let id = make_weight(None, 0.3, 7).unwrap();
        assert_eq!(id.dense(true), CMatrix::identity(7, 7));
        let m = random_matrix(7, 4, &mut ChaCha8Rng::seed_from_u64(2));
        assert_eq!(id.apply(&m, false).unwrap(), m);
    }

    #[test]
    fn dense_matches_complement_form() {
        let dim = 9;
        let s = random_subspace(dim, 3, 4);
        let u = s.basis().clone();
        let op = WeightOperator::new(s, 0.4).unwrap();
        let uu = &u * u.adjoint();
        let oracle = &uu * C64::new(0.4, 0.0) + (CMatrix::identity(dim, dim) - &uu);
        assert!(max_abs_diff(&op.dense(false), &oracle) < 1e-10);
        assert!(max_abs_diff(&op.dense(false), &op.dense(false).adjoint()) < 1e-12);
        assert!(max_abs_diff(&op.dense(true), &op.dense(true).adjoint()) < 1e-12);
    }

    #[test]
    fn forward_inverse_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let op = WeightOperator::new(random_subspace(11, 4, 5), 0.3).unwrap();
        let m = random_matrix(11, 6, &mut rng);
        let back = op.apply(&op.apply(&m, false).unwrap(), true).unwrap();
        assert!(max_abs_diff(&back, &m) < 1e-10);
        let prod = op.dense(false) * op.dense(true);
        assert!(max_abs_diff(&prod, &CMatrix::identity(11, 11)) < 1e-10);
        let implicit = op.apply(&m, true).unwrap();
        assert!(max_abs_diff(&implicit, &(op.dense(true) * &m)) < 1e-12);
    }

    #[test]
    fn eigenvector_action() {
        let s = random_subspace(9, 2, 6);
        let inside = s.basis() * random_matrix(2, 3, &mut ChaCha8Rng::seed_from_u64(1));
        let op = WeightOperator::new(s, 0.25).unwrap();
        let fwd = op.apply(&inside, false).unwrap();
        let inv = op.apply(&inside, true).unwrap();
        assert!(max_abs_diff(&fwd, &(&inside * C64::new(0.25, 0.0))) < 1e-12);
        assert!(max_abs_diff(&inv, &(&inside * C64::new(4.0, 0.0))) < 1e-12);
    }

    #[test]
    fn spectrum_is_w_and_one() {
        for &w in &[0.1, 0.5, 0.9] {
            for &rs in &[1usize, 5] {
                let op = WeightOperator::new(random_subspace(31, rs, rs as u64), w).unwrap();
                let mut eig: Vec<f64> =
                    SymmetricEigen::new(op.dense(false)).eigenvalues.iter().copied().collect();
                eig.sort_by(f64::total_cmp);
                for (i, e) in eig.iter().enumerate() {
                    let want = if i < rs { w } else { 1.0 };
                    assert!((e - want).abs() < 1e-8, "w={w} rs={rs} eig[{i}]={e}");
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let op = WeightOperator::new(random_subspace(7, 2, 3), 0.5).unwrap();
        assert!(op.apply(&CMatrix::zeros(6, 2), false).is_err());
        assert!(make_weight(Some(random_subspace(5, 1, 0)), 0.5, 7).is_err());
    }

    #[test]
    fn subspace_repair_and_rejection() {
        let s = random_subspace(8, 3, 12);
        let mut nudged = s.basis().clone();
        nudged[(0, 0)] += C64::new(1e-6, 0.0);
        let repaired = Subspace::new(nudged).unwrap();
        assert!(gram_deviation(repaired.basis()) < 1e-12);
        let raw = random_matrix(8, 3, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(Subspace::new(raw).is_err());
        assert!(Subspace::new(CMatrix::zeros(3, 4)).is_err());
    }

    #[test]
    fn substitution_identity_trivial_and_scaled() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let x = random_matrix(9, 9, &mut rng);
        let id = WeightOperator::identity(9);
        let c = weighted_nuclear_identity_check(&x, &id, &id, None).unwrap();
        assert_eq!(c.weighted_nuclear, c.substituted_nuclear);

        let u = random_subspace(9, 1, 31);
        let v = random_subspace(9, 1, 32);
        let rank1 = u.basis() * v.basis().adjoint() * C64::new(3.0, 0.0);
        let q = WeightOperator::new(u, 0.5).unwrap();
        let w = WeightOperator::new(v, 0.5).unwrap();
        let c = weighted_nuclear_identity_check(&rank1, &q, &w, None).unwrap();
        assert!((c.substituted_nuclear - 0.25 * nuclear_norm(&rank1)).abs() < 1e-10);
    }
}
