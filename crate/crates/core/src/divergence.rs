//! Kullback-Leibler pseudo-distance and Hellinger distances between sampled
//! spectra.

use crate::linalg::thin_svd;

use crate::error::{Error, Result};
use crate::spectrum::{SpectralDensity, SpectralFactor};

/// `∫ Ψ log(Ψ/Φ)` for scalar spectra.
pub fn kl_divergence(psi: &SpectralDensity, phi: &SpectralDensity) -> Result<f64> {
    psi.check_compatible(phi)?;
    let psi_s = psi.scalar_samples()?;
    let phi_s = phi.scalar_samples()?;
    let total: f64 = psi_s.iter().zip(&phi_s).map(|(p, f)| p * (p / f).ln()).sum();
    Ok(total / psi_s.len() as f64)
}

/// `[∫ (√Φ - √Ψ)²]^{1/2}` for scalar spectra.
pub fn hellinger_scalar(phi: &SpectralDensity, psi: &SpectralDensity) -> Result<f64> {
    phi.check_compatible(psi)?;
    let a = phi.scalar_samples()?;
    let b = psi.scalar_samples()?;
    let total: f64 = a.iter().zip(&b).map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2)).sum();
    Ok((total / a.len() as f64).sqrt())
}

/// Multivariable Hellinger distance.
///
/// With `X_k = Ψ_k^{1/2}` fixed, the best factor of `Φ_k` is `Φ_k^{1/2} U_k`
/// where `U_k` is the unitary polar factor of `Φ_k^{1/2} X_k`. The residual
/// `‖X_k - Φ_k^{1/2} U_k‖_F²` equals
/// `tr Φ_k + tr Ψ_k - 2 tr((Ψ_k^{1/2} Φ_k Ψ_k^{1/2})^{1/2})`.
/// The residual is formed explicitly so that nearby spectra do not lose
/// precision to cancellation.
pub fn hellinger_multivar(phi: &SpectralDensity, psi: &SpectralDensity) -> Result<f64> {
    phi.check_compatible(psi)?;
    aligned_factor_distance(&phi.hermitian_factor(), &psi.hermitian_factor())
}

/// `[(1/K) Σ_k min_U ‖W_Ψ,k - W_Φ,k U‖_F²]^{1/2}` for arbitrary square
/// factors; the minimizer is the polar factor of `W_Φ,k* W_Ψ,k`.
pub fn aligned_factor_distance(phi_factor: &SpectralFactor, psi_factor: &SpectralFactor) -> Result<f64> {
    let (a, b) = (phi_factor.samples(), psi_factor.samples());
    if a.len() != b.len() {
        return Err(Error::GridMismatch { expected: a.len(), found: b.len() });
    }
    let mut total = 0.0;
    for (y, x) in a.iter().zip(b) {
        let (u, _, v) = thin_svd(&(y.adjoint() * x))?;
        total += (x - y * (u * v.adjoint())).norm_squared();
    }
    Ok((total / a.len() as f64).sqrt())
}

/// `[(1/K) Σ_k ‖W_Ψ,k - W_Φ,k‖_F²]^{1/2}` without any alignment.
pub fn factor_distance(phi_factor: &SpectralFactor, psi_factor: &SpectralFactor) -> Result<f64> {
    let (a, b) = (phi_factor.samples(), psi_factor.samples());
    if a.len() != b.len() {
        return Err(Error::GridMismatch { expected: a.len(), found: b.len() });
    }
    let total: f64 = a.iter().zip(b).map(|(x, y)| (y - x).norm_squared()).sum();
    Ok((total / a.len() as f64).sqrt())
}
