//! Multivariable Hellinger dual
//!
//! ```text
//! J(Λ) = tr ∫ Q⁻¹ Ψ + tr(ΛΣ),    Q = I + G*ΛG > 0 on the circle
//! ```
//!
//! With `S_i = G*L_iG` and `P = Q⁻¹ΨQ⁻¹`:
//!
//! ```text
//! ∂_i J  = ⟨Σ, L_i⟩ - ∫ tr(S_i P)
//! ∂_ij J = ∫ tr(Q⁻¹S_jQ⁻¹S_iQ⁻¹Ψ) + tr(Q⁻¹S_iQ⁻¹S_jQ⁻¹Ψ) = 2 Re ∫ tr(S_i Q⁻¹ S_j P)
//! ```
//!
//! The primal optimum is `W = Q⁻¹W_Ψ`, `Φ = Q⁻¹ΨQ⁻¹`.

use nalgebra::{DMatrix, DVector};

use super::newton::{minimize, DualObjective, SolveReport};
use super::{DualVariable, Metric, SolveOptions};
use crate::circle::FrequencyGrid;
use crate::error::{Error, Result};
use crate::gamma::{gamma_adjoint, CovarianceInPGamma, RangeGammaBasis};
use crate::linalg::{hermitian_part, min_eigenvalue, trace_of_product, CMat, HermitianMatrix};
use crate::spectrum::{SpectralDensity, SpectralFactor, SpectrumRole};

pub struct HellingerDual<'a> {
    grid: &'a FrequencyGrid,
    basis: &'a RangeGammaBasis,
    sigma: HermitianMatrix,
    psi: Vec<CMat>,
    sigma_coords: Vec<f64>,
    /// `adjoint[i][k] = G_k* L_i G_k`.
    adjoint: Vec<Vec<CMat>>,
}

impl<'a> HellingerDual<'a> {
    pub fn new(
        grid: &'a FrequencyGrid,
        basis: &'a RangeGammaBasis,
        sigma: &CovarianceInPGamma,
        psi: &SpectralDensity,
    ) -> Result<Self> {
        grid.check_len(psi.grid_len())?;
        if psi.dim() != grid.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "prior is {0}x{0}, filter has m = {1}",
                psi.dim(),
                grid.input_dim()
            )));
        }
        let sigma = sigma.sigma().clone();
        let sigma_coords = basis.coordinates(&sigma);
        let adjoint = basis.elements().iter().map(|l| gamma_adjoint(grid, l)).collect();
        Ok(Self { grid, basis, sigma, psi: psi.samples().to_vec(), sigma_coords, adjoint })
    }

    fn m(&self) -> usize {
        self.grid.input_dim()
    }

    /// `Q_k = I + G_k*ΛG_k` for `Λ = Σ c_i L_i`.
    pub fn q_samples(&self, coords: &[f64]) -> Vec<CMat> {
        let m = self.m();
        (0..self.psi.len())
            .map(|k| {
                let mut q = CMat::identity(m, m);
                for (ci, s) in coords.iter().zip(&self.adjoint) {
                    q += s[k].scale(*ci);
                }
                q
            })
            .collect()
    }

    fn inverses(&self, coords: &[f64]) -> Result<Vec<CMat>> {
        let qs = self.q_samples(coords);
        let margin = margin_of(&qs);
        if !(margin > 0.0) {
            return Err(Error::DomainViolation { margin });
        }
        qs.into_iter()
            .map(|q| {
                q.try_inverse()
                    .map(|inv| hermitian_part(&inv))
                    .ok_or(Error::DomainViolation { margin })
            })
            .collect()
    }

    /// `Q_Λ⁻¹` on the grid for an arbitrary Hermitian `Λ` (not necessarily
    /// expressed in the basis).
    pub fn q_inverse_at_matrix(&self, lambda: &HermitianMatrix) -> Result<Vec<CMat>> {
        let m = self.m();
        let qs: Vec<CMat> = gamma_adjoint(self.grid, lambda)
            .into_iter()
            .map(|s| s + CMat::identity(m, m))
            .collect();
        let margin = margin_of(&qs);
        if !(margin > 0.0) {
            return Err(Error::DomainViolation { margin });
        }
        qs.into_iter()
            .map(|q| q.try_inverse().ok_or(Error::DomainViolation { margin }))
            .collect()
    }

    /// `J` evaluated from a materialized matrix rather than coordinates.
    pub fn value_at_matrix(&self, lambda: &HermitianMatrix) -> Result<f64> {
        let inv = self.q_inverse_at_matrix(lambda)?;
        let tr: f64 = inv.iter().zip(&self.psi).map(|(qi, p)| trace_of_product(qi, p).re).sum();
        Ok(tr / self.psi.len() as f64 + lambda.inner(&self.sigma))
    }

    pub fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.basis.dim()]
    }

    pub fn dual_variable(&self, coords: &[f64]) -> Result<DualVariable> {
        let margin = self.margin(coords);
        if !(margin > 0.0) {
            return Err(Error::DomainViolation { margin });
        }
        Ok(DualVariable {
            metric: Metric::Hellinger,
            coordinates: coords.to_vec(),
            matrix: self.basis.materialize(coords),
            margin,
        })
    }

    pub fn solve(&self, options: &SolveOptions) -> Result<(DualVariable, SolveReport)> {
        let start = options.initial.clone().unwrap_or_else(|| self.initial_point());
        let (coords, report) = minimize(self, &start, &options.newton(&self.sigma))?;
        Ok((self.dual_variable(&coords)?, report))
    }

    /// `Ŵ = Q⁻¹W_Ψ` and `Φ̂ = ŴŴ*`.
    pub fn primal(&self, dual: &DualVariable, psi_factor: &SpectralFactor) -> Result<(SpectralDensity, SpectralFactor)> {
        self.grid.check_len(psi_factor.samples().len())?;
        let inv = self.inverses(&dual.coordinates)?;
        let w: Vec<CMat> = inv.iter().zip(psi_factor.samples()).map(|(qi, wp)| qi * wp).collect();
        let factor = SpectralFactor::from_samples(w);
        let spectrum = SpectralDensity::new(factor.spectrum_samples(), SpectrumRole::Solution)?;
        Ok((spectrum, factor))
    }

    /// `max_k ‖Ŵ_k - W_Ψ,k + G_k*ΛG_k Ŵ_k‖_F`, the stationarity residual of
    /// the factor Lagrangian.
    pub fn factor_optimality_residual(
        &self,
        dual: &DualVariable,
        psi_factor: &SpectralFactor,
        factor: &SpectralFactor,
    ) -> f64 {
        let m = self.m();
        self.q_samples(&dual.coordinates)
            .iter()
            .zip(psi_factor.samples().iter().zip(factor.samples()))
            .map(|(q, (wp, w))| {
                let glg = q - CMat::identity(m, m);
                (w - wp + glg * w).norm()
            })
            .fold(0.0, f64::max)
    }
}

fn margin_of(qs: &[CMat]) -> f64 {
    qs.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min)
}

impl DualObjective for HellingerDual<'_> {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn margin(&self, coords: &[f64]) -> f64 {
        margin_of(&self.q_samples(coords))
    }

    fn value(&self, coords: &[f64]) -> Result<f64> {
        let inv = self.inverses(coords)?;
        let tr: f64 = inv.iter().zip(&self.psi).map(|(qi, p)| trace_of_product(qi, p).re).sum();
        let linear: f64 = coords.iter().zip(&self.sigma_coords).map(|(a, b)| a * b).sum();
        Ok(tr / self.psi.len() as f64 + linear)
    }

    fn gradient(&self, coords: &[f64]) -> Result<DVector<f64>> {
        let inv = self.inverses(coords)?;
        let p: Vec<CMat> = inv.iter().zip(&self.psi).map(|(qi, psi)| qi * psi * qi).collect();
        let k = p.len() as f64;
        Ok(DVector::from_iterator(
            self.dim(),
            self.adjoint.iter().zip(&self.sigma_coords).map(|(s, sigma_i)| {
                let moment: f64 = s.iter().zip(&p).map(|(si, pk)| trace_of_product(si, pk).re).sum::<f64>() / k;
                sigma_i - moment
            }),
        ))
    }

    fn hessian(&self, coords: &[f64]) -> Result<DMatrix<f64>> {
        let inv = self.inverses(coords)?;
        let d = self.dim();
        let k = inv.len();
        let mut h = DMatrix::zeros(d, d);
        for t in 0..k {
            let qi = &inv[t];
            let p = qi * &self.psi[t] * qi;
            let left: Vec<CMat> = self.adjoint.iter().map(|s| &s[t] * qi).collect();
            let right: Vec<CMat> = self.adjoint.iter().map(|s| &s[t] * &p).collect();
            for i in 0..d {
                for j in i..d {
                    h[(i, j)] += 2.0 * trace_of_product(&left[i], &right[j]).re;
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                let v = h[(i, j)] / k as f64;
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        Ok(h)
    }
}
