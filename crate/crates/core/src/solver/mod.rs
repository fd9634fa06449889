//! Convex dual problems for the two spectrum approximation criteria.
//!
//! Dual variables live in Range Γ and are optimized in the coordinates of a
//! [`RangeGammaBasis`]. Both problems share the guarded Newton engine in
//! [`newton`].

pub mod hellinger;
pub mod kl;
pub mod newton;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circle::FrequencyGrid;
use crate::error::Result;
use crate::gamma::{gamma_apply, CovarianceInPGamma, RangeGammaBasis};
use crate::linalg::HermitianMatrix;
use crate::spectrum::{SpectralDensity, SpectralFactor};

pub use hellinger::HellingerDual;
pub use kl::KlDual;
pub use newton::{DualObjective, NewtonOptions, SolveReport, Termination};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "kl")]
    KullbackLeibler,
    #[serde(rename = "hellinger")]
    Hellinger,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::KullbackLeibler => "kl",
            Metric::Hellinger => "hellinger",
        })
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "kl" => Ok(Metric::KullbackLeibler),
            "hellinger" => Ok(Metric::Hellinger),
            other => Err(format!("unknown metric '{other}' (expected kl or hellinger)")),
        }
    }
}

/// `Λ = Σ_i c_i L_i` with its domain margin: `min_k λ_min(G_k*ΛG_k)` for
/// the Kullback-Leibler dual and `min_k λ_min(I + G_k*ΛG_k)` for Hellinger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualVariable {
    pub metric: Metric,
    pub coordinates: Vec<f64>,
    pub matrix: HermitianMatrix,
    pub margin: f64,
}

/// User-facing solver settings. The gradient tolerance is
/// `tolerance · (1 + ‖Σ‖_F)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub tolerance: f64,
    pub max_iter: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Starting coordinates; the default admissible point when `None`.
    pub initial: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tolerance: 1e-9, max_iter: 200, armijo: 1e-4, backtrack: 0.5, max_backtracks: 60, initial: None }
    }
}

impl SolveOptions {
    pub(crate) fn newton(&self, sigma: &HermitianMatrix) -> NewtonOptions {
        NewtonOptions {
            gradient_tolerance: self.tolerance * (1.0 + sigma.frobenius()),
            max_iter: self.max_iter,
            armijo: self.armijo,
            backtrack: self.backtrack,
            max_backtracks: self.max_backtracks,
        }
    }
}

/// Dual optimum, primal spectrum and diagnostics of one solve.
#[derive(Clone, Debug)]
pub struct Solution {
    pub dual: DualVariable,
    pub spectrum: SpectralDensity,
    /// Optimal spectral factor (Hellinger only).
    pub factor: Option<SpectralFactor>,
    pub report: SolveReport,
    /// `‖Γ(Φ̂) - Σ‖_F`.
    pub constraint_residual: f64,
}

/// Solves the dual for `metric` and reconstructs the primal optimum.
pub fn solve(
    metric: Metric,
    grid: &FrequencyGrid,
    basis: &RangeGammaBasis,
    sigma: &CovarianceInPGamma,
    psi: &SpectralDensity,
    options: &SolveOptions,
) -> Result<Solution> {
    let (dual, spectrum, factor, report) = match metric {
        Metric::KullbackLeibler => {
            let problem = KlDual::new(grid, basis, sigma, psi)?;
            let (dual, report) = problem.solve(options)?;
            let spectrum = problem.primal(&dual)?;
            (dual, spectrum, None, report)
        }
        Metric::Hellinger => {
            let problem = HellingerDual::new(grid, basis, sigma, psi)?;
            let (dual, report) = problem.solve(options)?;
            let (spectrum, factor) = problem.primal(&dual, &psi.hermitian_factor())?;
            (dual, spectrum, Some(factor), report)
        }
    };
    let constraint_residual = (&gamma_apply(grid, &spectrum)? - sigma.sigma()).frobenius();
    Ok(Solution { dual, spectrum, factor, report, constraint_residual })
}
