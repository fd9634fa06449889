//! Seeded generators for filters, spectra and directions.
//!
//! Every experiment derives its randomness from these helpers so that a
//! master seed fixes every draw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::circle::{FrequencyGrid, StateSpaceFilter};
use crate::error::Result;
use crate::gamma::{gamma_apply, CovarianceInPGamma, RangeGammaBasis};
use crate::linalg::{c, CMat, HermitianMatrix, C64};
use crate::spectrum::{SpectralDensity, SpectrumRole};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Circularly-symmetric complex Gaussian with `E|z|² = 1`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// Random stable, reachable pair with `ρ(A) = radius`.
pub fn random_filter<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, radius: f64) -> StateSpaceFilter {
    loop {
        let a = complex_gaussian_matrix(rng, n, n);
        let rho = nalgebra::Schur::new(a.clone())
            .eigenvalues()
            .map(|e| e.iter().map(|z| z.norm()).fold(0.0, f64::max))
            .unwrap_or(0.0);
        if rho < 1e-3 {
            continue;
        }
        let a = a.scale(radius / rho);
        let b = complex_gaussian_matrix(rng, n, m);
        if let Ok(f) = StateSpaceFilter::new(a, b) {
            return f;
        }
    }
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, p: usize) -> HermitianMatrix {
    let coords: Vec<f64> = (0..p * p).map(|_| rng.sample(StandardNormal)).collect();
    HermitianMatrix::from_coords(p, &coords)
}

/// Unit-norm direction inside Range Γ.
pub fn random_range_direction<R: Rng + ?Sized>(rng: &mut R, basis: &RangeGammaBasis) -> HermitianMatrix {
    let mut coords: Vec<f64> = (0..basis.dim()).map(|_| rng.sample(StandardNormal)).collect();
    let norm = coords.iter().map(|x| x * x).sum::<f64>().sqrt();
    coords.iter_mut().for_each(|x| *x /= norm);
    basis.materialize(&coords)
}

/// Haar-distributed unitary matrix.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, p: usize) -> CMat {
    let z = complex_gaussian_matrix(rng, p, p);
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..p {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..p {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// A smooth, coercive spectrum `Φ(θ) = P(e^{jθ}) P(e^{jθ})* + floor·I`
/// with `P(z) = P₀ + P₁ z⁻¹` drawn at random.
pub fn random_spectrum<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    grid_points: usize,
    floor: f64,
    role: SpectrumRole,
) -> Result<SpectralDensity> {
    let p0 = complex_gaussian_matrix(rng, m, m);
    let p1 = complex_gaussian_matrix(rng, m, m).scale(0.6);
    SpectralDensity::from_fn(grid_points, role, |theta| {
        let p = &p0 + &p1 * C64::from_polar(1.0, -theta);
        &p * p.adjoint() + CMat::identity(m, m).scale(floor)
    })
}

/// A feasible problem: filter, its grid and basis, `Σ = Γ(Φ_true)` and an
/// independent prior `Ψ`.
#[derive(Clone, Debug)]
pub struct Instance {
    pub filter: StateSpaceFilter,
    pub grid: FrequencyGrid,
    pub basis: RangeGammaBasis,
    pub phi_true: SpectralDensity,
    pub sigma: CovarianceInPGamma,
    pub psi: SpectralDensity,
}

pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, grid_points: usize) -> Result<Instance> {
    let filter = random_filter(rng, n, m, 0.8);
    let grid = filter.eval_transfer(grid_points)?;
    let basis = RangeGammaBasis::compute(&grid);
    let phi_true = random_spectrum(rng, m, grid_points, 0.2, SpectrumRole::True)?;
    let psi = random_spectrum(rng, m, grid_points, 0.2, SpectrumRole::Prior)?;
    let sigma = CovarianceInPGamma::certify(&filter, gamma_apply(&grid, &phi_true)?, &basis)?;
    Ok(Instance { filter, grid, basis, phi_true, sigma, psi })
}
