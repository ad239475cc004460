//! Factorized recovery of a single frequency slice.
//!
//! Minimizes, over factors `(L, R)` of the substituted variable
//! `X̄ = L·Rᴴ`,
//!
//! ```text
//! f(L, R) = ½‖𝒜(Q⁻¹·L·Rᴴ·W⁻¹) − b‖² + (λ/2)(‖L‖²_F + ‖R‖²_F)
//! ```
//!
//! with a Barzilai–Borwein gradient method and a non-monotone line search.
//! Gradients are taken with respect to the real and imaginary parts as
//! independent coordinates, so the directional derivative along `D` is
//! `Re⟨g, D⟩`.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::error::{Error, Result};
use crate::linalg::{frob_sq, random_matrix, re_inner, vec_norm, CMatrix, C64};
use crate::sampling::SamplingOperator;
use crate::weights::WeightOperator;

/// Objectives compared by the non-monotone acceptance test.
const NONMONOTONE_WINDOW: usize = 5;
const MAX_HALVINGS: usize = 20;
const DIVERGENCE_FACTOR: f64 = 1e6;
const ARMIJO_C: f64 = 1e-4;

/// Low-rank factors of a slice, `X = left · rightᴴ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub left: CMatrix,
    pub right: CMatrix,
}

impl FactorPair {
    pub fn new(left: CMatrix, right: CMatrix) -> Result<Self> {
        if left.ncols() == 0 || left.ncols() != right.ncols() || left.nrows() != right.nrows() {
            return Err(Error::arg(format!(
                "factor shapes {:?} and {:?} are inconsistent",
                left.shape(),
                right.shape()
            )));
        }
        if left.iter().chain(right.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::arg("factors contain non-finite entries"));
        }
        Ok(FactorPair { left, right })
    }

    pub fn zeros(dim: usize, rank: usize) -> Self {
        FactorPair { left: CMatrix::zeros(dim, rank), right: CMatrix::zeros(dim, rank) }
    }

    pub fn rank(&self) -> usize {
        self.left.ncols()
    }

    pub fn dim(&self) -> usize {
        self.left.nrows()
    }

    /// Dense `left · rightᴴ`.
    pub fn product(&self) -> CMatrix {
        &self.left * self.right.adjoint()
    }

    pub fn frob_sq(&self) -> f64 {
        frob_sq(&self.left) + frob_sq(&self.right)
    }

    fn axpy(&self, alpha: f64, dir: &FactorPair) -> FactorPair {
        let a = C64::new(alpha, 0.0);
        FactorPair { left: &self.left + &dir.left * a, right: &self.right + &dir.right * a }
    }

    fn sub(&self, other: &FactorPair) -> FactorPair {
        FactorPair { left: &self.left - &other.left, right: &self.right - &other.right }
    }

    fn re_inner(&self, other: &FactorPair) -> f64 {
        re_inner(&self.left, &other.left) + re_inner(&self.right, &other.right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// Spectral step with a non-monotone acceptance window.
    BarzilaiBorwein,
    /// Armijo backtracking from a growing trial step.
    FixedBacktracking,
}

/// Frobenius penalty weight λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    Absolute(f64),
    /// λ = factor · ‖b‖².
    RelativeToData(f64),
}

impl Penalty {
    pub fn resolve(&self, b_norm: f64) -> f64 {
        match *self {
            Penalty::Absolute(l) => l,
            Penalty::RelativeToData(c) => c * b_norm * b_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveParams {
    pub rank: usize,
    pub max_iters: usize,
    pub lambda: Penalty,
    /// Stop once the data misfit `‖ρ‖₂` falls to this level; 0 disables.
    pub misfit_tol: f64,
    pub seed: u64,
    pub step_rule: StepRule,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            rank: 85,
            max_iters: 150,
            lambda: Penalty::RelativeToData(1e-6),
            misfit_tol: 0.0,
            seed: 0,
            step_rule: StepRule::BarzilaiBorwein,
        }
    }
}

impl SolveParams {
    fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::arg("rank must be >= 1"));
        }
        if self.max_iters == 0 {
            return Err(Error::arg("max_iters must be >= 1"));
        }
        let lam = match self.lambda {
            Penalty::Absolute(l) | Penalty::RelativeToData(l) => l,
        };
        if !(lam >= 0.0 && lam.is_finite()) {
            return Err(Error::arg(format!("lambda must be finite and >= 0, got {lam}")));
        }
        if !(self.misfit_tol >= 0.0) {
            return Err(Error::arg("misfit_tol must be >= 0"));
        }
        Ok(())
    }
}

/// Per-solve diagnostics. Histories track the best iterate seen so far, so
/// the last misfit entry belongs to the returned factors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub misfit_history: Vec<f64>,
    pub objective_history: Vec<f64>,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub final_misfit: f64,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Setup(#[from] Error),
    #[error(
        "solver diverged at iteration {iteration}: objective {objective:.3e} exceeds \
         {DIVERGENCE_FACTOR:e} x initial {initial:.3e}"
    )]
    Diverged { iteration: usize, objective: f64, initial: f64, stats: SolveStats },
    #[error("non-finite objective at iteration {iteration}")]
    NonFinite { iteration: usize, stats: SolveStats },
}

impl SolveError {
    pub fn stats(&self) -> Option<&SolveStats> {
        match self {
            SolveError::Setup(_) => None,
            SolveError::Diverged { stats, .. } | SolveError::NonFinite { stats, .. } => Some(stats),
        }
    }
}

/// Objective value, misfit and gradient at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub objective: f64,
    pub misfit: f64,
    pub gradient: FactorPair,
}

/// One slice's data, sampling operator, and inverse-mode weights.
#[derive(Debug, Clone, Copy)]
pub struct SliceProblem<'a> {
    pub sampling: &'a SamplingOperator,
    pub q: &'a WeightOperator,
    pub w: &'a WeightOperator,
    pub b: &'a [C64],
    pub lambda: f64,
}

impl<'a> SliceProblem<'a> {
    pub fn new(
        sampling: &'a SamplingOperator,
        q: &'a WeightOperator,
        w: &'a WeightOperator,
        b: &'a [C64],
        lambda: f64,
    ) -> Result<Self> {
        let d = sampling.mh_dim();
        if q.dim() != d || w.dim() != d {
            return Err(Error::arg(format!(
                "weights act on C^{} / C^{}, slice side is {d}",
                q.dim(),
                w.dim()
            )));
        }
        if b.len() != sampling.n_observations() {
            return Err(Error::arg(format!(
                "{} data values for {} observed cells",
                b.len(),
                sampling.n_observations()
            )));
        }
        Ok(SliceProblem { sampling, q, w, b, lambda })
    }

    /// Residual `𝒜(Q⁻¹·L·Rᴴ·W⁻¹) − b` together with `Q⁻¹L` and `W⁻¹R`.
    fn residual(&self, f: &FactorPair) -> Result<(Vec<C64>, CMatrix, CMatrix)> {
        let ql = self.q.apply(&f.left, true)?;
        let wr = self.w.apply(&f.right, true)?;
        let mut rho = self.sampling.apply_factored(&ql, &wr)?;
        for (p, b) in rho.iter_mut().zip(self.b) {
            *p -= b;
        }
        Ok((rho, ql, wr))
    }

    pub fn misfit(&self, f: &FactorPair) -> Result<f64> {
        Ok(vec_norm(&self.residual(f)?.0))
    }

    pub fn evaluate(&self, f: &FactorPair) -> Result<Evaluation> {
        let (rho, ql, wr) = self.residual(f)?;
        let misfit = vec_norm(&rho);
        let objective = 0.5 * misfit * misfit + 0.5 * self.lambda * f.frob_sq();
        if !objective.is_finite() {
            return Err(Error::Numeric { iteration: 0, message: "objective is not finite".into() });
        }
        let lam = C64::new(self.lambda, 0.0);
        let gl = self.q.apply(&self.sampling.adjoint_times(&rho, &wr)?, true)? + &f.left * lam;
        let gr = self.w.apply(&self.sampling.adjoint_conj_times(&rho, &ql)?, true)? + &f.right * lam;
        Ok(Evaluation { objective, misfit, gradient: FactorPair { left: gl, right: gr } })
    }
}

/// Objective and gradient of the penalized factorized problem.
pub fn objective_and_gradient(
    f: &FactorPair,
    q: &WeightOperator,
    w: &WeightOperator,
    sampling: &SamplingOperator,
    b: &[C64],
    lambda: f64,
) -> Result<(f64, FactorPair)> {
    let ev = SliceProblem::new(sampling, q, w, b, lambda)?.evaluate(f)?;
    Ok((ev.objective, ev.gradient))
}

/// Random complex Gaussian factors scaled so that `‖𝒜(L·Rᴴ)‖ = ‖b‖`.
pub fn init_factors(
    sampling: &SamplingOperator,
    rank: usize,
    b: &[C64],
    seed: u64,
) -> Result<FactorPair> {
    let dim = sampling.mh_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let left = random_matrix(dim, rank, &mut rng);
    let right = random_matrix(dim, rank, &mut rng);
    let b_norm = vec_norm(b);
    let pred_norm = vec_norm(&sampling.apply_factored(&left, &right)?);
    let scale = if b_norm == 0.0 || pred_norm == 0.0 { 0.0 } else { (b_norm / pred_norm).sqrt() };
    let s = C64::new(scale, 0.0);
    Ok(FactorPair { left: left * s, right: right * s })
}

/// Recovers the factors of one slice; returns the lowest-objective iterate.
pub fn solve_slice(
    b: &[C64],
    sampling: &SamplingOperator,
    q: &WeightOperator,
    w: &WeightOperator,
    params: &SolveParams,
) -> Result<(FactorPair, SolveStats), SolveError> {
    params.validate()?;
    let dim = sampling.mh_dim();
    let mut rank = params.rank;
    if rank > dim {
        log::warn!("rank {rank} exceeds slice dimension {dim}; clamping");
        rank = dim;
    }
    let lambda = params.lambda.resolve(vec_norm(b));
    let problem = SliceProblem::new(sampling, q, w, b, lambda)?;

    let mut x = init_factors(sampling, rank, b, params.seed)?;
    let mut ev = problem.evaluate(&x)?;
    let initial = ev.objective;
    let mut stats = SolveStats { initial_objective: initial, ..SolveStats::default() };
    let mut best = (x.clone(), ev.objective, ev.misfit);
    let mut recent: VecDeque<f64> = VecDeque::from([ev.objective]);
    let mut step = initial_step(&x);

    for iteration in 1..=params.max_iters {
        if params.misfit_tol > 0.0 && ev.misfit <= params.misfit_tol {
            break;
        }
        let g_sq = ev.gradient.frob_sq();
        if g_sq == 0.0 {
            break;
        }
        let reference = match params.step_rule {
            StepRule::BarzilaiBorwein => recent.iter().copied().fold(f64::MIN, f64::max),
            StepRule::FixedBacktracking => ev.objective,
        };

        let mut trial_step = step;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial = x.axpy(-trial_step, &ev.gradient);
            let trial_ev = match problem.evaluate(&trial) {
                Ok(e) => e,
                Err(Error::Numeric { .. }) => {
                    trial_step *= 0.5;
                    continue;
                }
                Err(e) => return Err(e.into()),
            };
            let ok = match params.step_rule {
                StepRule::BarzilaiBorwein => trial_ev.objective <= reference,
                StepRule::FixedBacktracking => {
                    trial_ev.objective <= reference - ARMIJO_C * trial_step * g_sq
                }
            };
            if ok {
                accepted = Some((trial, trial_ev));
                break;
            }
            trial_step *= 0.5;
        }
        let Some((next, next_ev)) = accepted else {
            log::debug!("line search stalled at iteration {iteration}");
            break;
        };
        if !next_ev.objective.is_finite() {
            return Err(SolveError::NonFinite { iteration, stats });
        }
        if initial > 0.0 && next_ev.objective > DIVERGENCE_FACTOR * initial {
            return Err(SolveError::Diverged {
                iteration,
                objective: next_ev.objective,
                initial,
                stats,
            });
        }

        step = match params.step_rule {
            StepRule::BarzilaiBorwein => {
                let s = next.sub(&x);
                let y = next_ev.gradient.sub(&ev.gradient);
                let sy = s.re_inner(&y);
                let bb = s.frob_sq() / sy;
                if sy > 0.0 && bb.is_finite() {
                    bb
                } else {
                    2.0 * trial_step
                }
            }
            StepRule::FixedBacktracking => 2.0 * trial_step,
        };

        x = next;
        ev = next_ev;
        recent.push_back(ev.objective);
        if recent.len() > NONMONOTONE_WINDOW {
            recent.pop_front();
        }
        if ev.objective < best.1 {
            best = (x.clone(), ev.objective, ev.misfit);
        }
        stats.iterations = iteration;
        stats.misfit_history.push(best.2);
        stats.objective_history.push(best.1);
    }

    stats.final_objective = best.1;
    stats.final_misfit = best.2;
    Ok((best.0, stats))
}

fn initial_step(x: &FactorPair) -> f64 {
    let scale = x.frob_sq();
    if scale > 0.0 {
        1.0 / scale
    } else {
        1.0
    }
}
