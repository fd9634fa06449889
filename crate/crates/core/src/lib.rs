//! Spectrum approximation under state-covariance constraints.
//!
//! Given a stable, reachable filter `G(z) = (zI - A)⁻¹B`, an output covariance
//! `Σ` and a prior spectrum `Ψ`, find the spectrum `Φ` closest to `Ψ` with
//! `∫ G Φ G* = Σ`. Closeness is the Kullback-Leibler pseudo-distance (scalar
//! processes) or the multivariable Hellinger distance. Both problems are
//! solved through their convex duals over Range Γ.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circle;
pub mod divergence;
pub mod error;
pub mod estimation;
pub mod gamma;
pub mod linalg;
pub mod random;
pub mod solver;
pub mod spectrum;

pub use circle::{FrequencyGrid, StateSpaceFilter};
pub use error::{Error, Result};
pub use gamma::{feasibility, gamma_apply, nearest_feasible, CovarianceInPGamma, FeasibilityCertificate, RangeGammaBasis};
pub use linalg::{CMat, HermitianMatrix, C64};
pub use solver::{solve, DualVariable, Metric, Solution, SolveOptions, SolveReport};
pub use spectrum::{SpectralDensity, SpectralFactor, SpectrumRole};
