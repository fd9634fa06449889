//! From data to spectrum: process synthesis, the state recursion of the
//! filter bank, sample covariances, and the continuity and consistency
//! experiments built on top of them.

mod experiment;
mod synthesis;

pub use experiment::{
    consistency_experiment, continuity_experiment, ConsistencyConfig, ConsistencyRow, ConsistencySummary,
    ConsistencyTable, ContinuityRow, ContinuityTable, RowStatus,
};
pub use synthesis::{generate_process, ProcessSynthesizer, DEFAULT_TAPS};

use nalgebra::DVector;

use crate::circle::StateSpaceFilter;
use crate::error::{Error, Result};
use crate::linalg::{CMat, HermitianMatrix, C64};

pub type Sample = DVector<C64>;

/// `max(10n, 100)` initial states are dropped before averaging.
pub fn default_burn_in(n: usize) -> usize {
    (10 * n).max(100)
}

/// Inputs `y_1..y_N` and states `x_1..x_N` with `x(t+1) = A x(t) + B y(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTrajectory {
    pub y: Vec<Sample>,
    pub x: Vec<Sample>,
    pub seed: Option<u64>,
}

impl SampleTrajectory {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Recomputes the states from the stored inputs and compares exactly.
    pub fn replay_matches(&self, filter: &StateSpaceFilter) -> bool {
        match self.x.first() {
            None => true,
            Some(x0) => run_state_recursion(filter, self.y.clone(), Some(x0.clone()))
                .map(|t| t.x == self.x)
                .unwrap_or(false),
        }
    }
}

/// Exact recursion starting from `x_init` (zero by default).
pub fn run_state_recursion(
    filter: &StateSpaceFilter,
    y: Vec<Sample>,
    x_init: Option<Sample>,
) -> Result<SampleTrajectory> {
    let n = filter.state_dim();
    let m = filter.input_dim();
    if let Some((i, _)) = y.iter().enumerate().find(|(_, v)| v.len() != m) {
        return Err(Error::DimensionMismatch(format!("input sample {i} has length != {m}")));
    }
    let x_init = x_init.unwrap_or_else(|| Sample::zeros(n));
    if x_init.len() != n {
        return Err(Error::DimensionMismatch(format!("initial state has length {} != {n}", x_init.len())));
    }
    let mut x = Vec::with_capacity(y.len());
    if !y.is_empty() {
        x.push(x_init);
        for t in 0..y.len() - 1 {
            let next = filter.a() * &x[t] + filter.b() * &y[t];
            x.push(next);
        }
    }
    Ok(SampleTrajectory { y, x, seed: None })
}

/// `(1/(N-b)) Σ_{k>b} x_k x_k*`.
pub fn sample_covariance(traj: &SampleTrajectory, burn_in: usize) -> Result<HermitianMatrix> {
    let n = traj.x.first().map(|v| v.len()).unwrap_or(0);
    let available = traj.len().saturating_sub(burn_in);
    if traj.is_empty() || available < n.max(1) {
        return Err(Error::TooFewSamples { available, required: n.max(1) });
    }
    let mut acc = CMat::zeros(n, n);
    for x in &traj.x[burn_in..] {
        acc += x * x.adjoint();
    }
    Ok(HermitianMatrix::symmetrize(&acc.unscale(available as f64)))
}
