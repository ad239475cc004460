//! Seismic wavefield reconstruction from jitter-subsampled sources with
//! recursively weighted, limited-subspace low-rank matrix factorization.
//!
//! Each temporal frequency of a 2D line is handled as a complex matrix in
//! midpoint–offset coordinates and recovered from its observed sources by
//! a factorized solver ([`solver`]). Sweeping from low to high frequency,
//! the subspaces of each recovered slice weight the next one ([`sweep`]).

pub mod cli;
pub mod datamodel;
pub mod error;
pub mod evaluate;
pub mod linalg;
pub mod sampling;
pub mod solver;
pub mod spectral;
pub mod sweep;
pub mod synth;
pub mod weights;

pub use datamodel::{FrequencySlice, GridGeometry, SeismicVolume, SliceDomain};
pub use error::{Error, Result};
pub use sampling::{ObservedData, SamplingOperator, SourceMask};
pub use solver::{FactorPair, Penalty, SolveParams, SolveStats, StepRule};
pub use sweep::{recover_band, RecoveredBand, SweepConfig, SweepMode};
pub use weights::{Subspace, WeightOperator};
