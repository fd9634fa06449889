//! Scalar Kullback-Leibler dual
//!
//! ```text
//! J(Λ) = -∫ Ψ log(G*ΛG) + tr(ΛΣ),     Λ ∈ Range Γ,  G*ΛG > 0 on the circle
//! ```
//!
//! In basis coordinates, with `s_i(θ) = G*L_iG` and `q = Σ_i c_i s_i`:
//! `∂_i J = ⟨Σ, L_i⟩ - ∫ Ψ s_i / q` and `∂_ij J = ∫ Ψ s_i s_j / q²`.
//! The primal optimum is `Φ = Ψ / q`.

use nalgebra::{DMatrix, DVector};

use super::newton::{minimize, DualObjective, SolveReport};
use super::{DualVariable, Metric, SolveOptions};
use crate::circle::{integrate_scalar, scalar, FrequencyGrid};
use crate::error::{Error, Result};
use crate::gamma::{gamma_adjoint, CovarianceInPGamma, RangeGammaBasis};
use crate::linalg::HermitianMatrix;
use crate::spectrum::{SpectralDensity, SpectrumRole};

pub struct KlDual<'a> {
    grid: &'a FrequencyGrid,
    basis: &'a RangeGammaBasis,
    sigma: HermitianMatrix,
    psi: Vec<f64>,
    /// `⟨Σ, L_i⟩`.
    sigma_coords: Vec<f64>,
    /// `adjoint[i][k] = G_k* L_i G_k`.
    adjoint: Vec<Vec<f64>>,
}

impl<'a> KlDual<'a> {
    pub fn new(
        grid: &'a FrequencyGrid,
        basis: &'a RangeGammaBasis,
        sigma: &CovarianceInPGamma,
        psi: &SpectralDensity,
    ) -> Result<Self> {
        if grid.input_dim() != 1 {
            return Err(Error::NotScalar(grid.input_dim()));
        }
        grid.check_len(psi.grid_len())?;
        let psi = psi.scalar_samples()?;
        let sigma = sigma.sigma().clone();
        let sigma_coords = basis.coordinates(&sigma);
        let adjoint = basis
            .elements()
            .iter()
            .map(|l| gamma_adjoint(grid, l).iter().map(|s| s[(0, 0)].re).collect())
            .collect();
        Ok(Self { grid, basis, sigma, psi, sigma_coords, adjoint })
    }

    /// `q_k = G_k*ΛG_k` for `Λ = Σ c_i L_i`.
    pub fn denominators(&self, coords: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.psi.len()];
        for (ci, s) in coords.iter().zip(&self.adjoint) {
            for (qk, sk) in q.iter_mut().zip(s) {
                *qk += ci * sk;
            }
        }
        q
    }

    fn in_domain(&self, coords: &[f64]) -> Result<Vec<f64>> {
        let q = self.denominators(coords);
        let margin = q.iter().copied().fold(f64::INFINITY, f64::min);
        if !(margin > 0.0) {
            return Err(Error::DomainViolation { margin });
        }
        Ok(q)
    }

    /// Coordinates of `Π(I)`, where `G*Π(I)G = G*G > 0`.
    pub fn initial_point(&self) -> Vec<f64> {
        self.basis.coordinates(&HermitianMatrix::identity(self.basis.state_dim()))
    }

    pub fn dual_variable(&self, coords: &[f64]) -> Result<DualVariable> {
        let margin = self.margin(coords);
        if !(margin > 0.0) {
            return Err(Error::DomainViolation { margin });
        }
        Ok(DualVariable {
            metric: Metric::KullbackLeibler,
            coordinates: coords.to_vec(),
            matrix: self.basis.materialize(coords),
            margin,
        })
    }

    /// `J` evaluated from a materialized matrix rather than coordinates.
    pub fn value_at_matrix(&self, lambda: &HermitianMatrix) -> Result<f64> {
        let q: Vec<f64> = gamma_adjoint(self.grid, lambda).iter().map(|s| s[(0, 0)].re).collect();
        let margin = q.iter().copied().fold(f64::INFINITY, f64::min);
        if !(margin > 0.0) {
            return Err(Error::DomainViolation { margin });
        }
        let log_term: Vec<f64> = self.psi.iter().zip(&q).map(|(p, qk)| p * qk.ln()).collect();
        Ok(-integrate_scalar(&log_term) + lambda.inner(&self.sigma))
    }

    pub fn solve(&self, options: &SolveOptions) -> Result<(DualVariable, SolveReport)> {
        let start = options.initial.clone().unwrap_or_else(|| self.initial_point());
        let (coords, report) = minimize(self, &start, &options.newton(&self.sigma))?;
        Ok((self.dual_variable(&coords)?, report))
    }

    /// `Φ̂ = Ψ / (G*ΛG)`.
    pub fn primal(&self, dual: &DualVariable) -> Result<SpectralDensity> {
        let q = self.in_domain(&dual.coordinates)?;
        let samples = self.psi.iter().zip(&q).map(|(p, qk)| scalar(p / qk)).collect();
        SpectralDensity::new(samples, SpectrumRole::Solution)
    }
}

impl DualObjective for KlDual<'_> {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn margin(&self, coords: &[f64]) -> f64 {
        self.denominators(coords).into_iter().fold(f64::INFINITY, f64::min)
    }

    fn value(&self, coords: &[f64]) -> Result<f64> {
        let q = self.in_domain(coords)?;
        let log_term: Vec<f64> = self.psi.iter().zip(&q).map(|(p, qk)| p * qk.ln()).collect();
        let linear: f64 = coords.iter().zip(&self.sigma_coords).map(|(a, b)| a * b).sum();
        Ok(-integrate_scalar(&log_term) + linear)
    }

    fn gradient(&self, coords: &[f64]) -> Result<DVector<f64>> {
        let q = self.in_domain(coords)?;
        let ratio: Vec<f64> = self.psi.iter().zip(&q).map(|(p, qk)| p / qk).collect();
        let k = q.len() as f64;
        Ok(DVector::from_iterator(
            self.dim(),
            self.adjoint.iter().zip(&self.sigma_coords).map(|(s, sigma_i)| {
                let moment: f64 = s.iter().zip(&ratio).map(|(a, b)| a * b).sum::<f64>() / k;
                sigma_i - moment
            }),
        ))
    }

    fn hessian(&self, coords: &[f64]) -> Result<DMatrix<f64>> {
        let q = self.in_domain(coords)?;
        let weight: Vec<f64> = self.psi.iter().zip(&q).map(|(p, qk)| p / (qk * qk)).collect();
        let d = self.dim();
        let k = q.len() as f64;
        let mut h = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v: f64 = (0..q.len()).map(|t| weight[t] * self.adjoint[i][t] * self.adjoint[j][t]).sum::<f64>() / k;
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        Ok(h)
    }
}
