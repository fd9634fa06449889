use thiserror::Error;

use crate::gamma::FeasibilityCertificate;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("state matrix is not stable: spectral radius {spectral_radius} exceeds 1 - {margin}")]
    NotStable { spectral_radius: f64, margin: f64 },

    #[error("input matrix has rank {rank}, expected full column rank {expected}")]
    RankDeficientB { rank: usize, expected: usize },

    #[error("pair (A, B) is not reachable: reachability rank {rank} < {expected}")]
    NotReachable { rank: usize, expected: usize },

    #[error("resolvent (zI - A) is singular at theta = {theta}")]
    SingularResolvent { theta: f64 },

    #[error("invalid grid size {0}: must be even and at least {min}", min = crate::circle::MIN_GRID_POINTS)]
    InvalidGrid(usize),

    #[error("spectrum sampled on {found} points, grid has {expected}")]
    GridMismatch { expected: usize, found: usize },

    #[error("sample {index} is not Hermitian (asymmetry {asymmetry:e})")]
    NotHermitian { index: usize, asymmetry: f64 },

    #[error("sample {index} is not coercive: eigenvalues in [{min:e}, {max:e}]")]
    NotCoercive { index: usize, min: f64, max: f64 },

    #[error("Kullback-Leibler approximation is scalar-only (got m = {0})")]
    NotScalar(usize),

    #[error("dual variable outside its domain (margin {margin:e})")]
    DomainViolation { margin: f64 },

    #[error("covariance is not feasible (projection residual {:e}, min eigenvalue {:e})", .0.projection_residual, .0.min_eigenvalue)]
    Infeasible(Box<FeasibilityCertificate>),

    #[error("nearest-feasible repair failed: blend with Gamma(I) does not reach the positivity floor")]
    RepairFailed,

    #[error("too few samples: {available} available after burn-in, need at least {required}")]
    TooFewSamples { available: usize, required: usize },

    #[error("no perturbation in the t-list keeps the covariance feasible")]
    InfeasiblePerturbation,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
