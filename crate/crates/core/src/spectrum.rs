//! Grid-sampled spectral densities and their square spectral factors.

use serde::{Deserialize, Serialize};

use crate::circle::grid_angle;
use crate::error::{Error, Result};
use crate::linalg::{asymmetry, eigenvalues_hermitian, hermitian_part, hermitian_sqrt, spectral_norm, CMat};

/// Lower eigenvalue bound (and inverse upper bound) for sampled spectra.
pub const COERCIVITY: f64 = 1e-8;
/// Relative Hermitian tolerance for spectrum samples.
pub const HERMITIAN_TOLERANCE: f64 = 1e-13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumRole {
    Prior,
    Solution,
    True,
    Estimate,
}

/// An `m×m` Hermitian positive-definite matrix function sampled on the grid
/// `θ_k = 2πk/K`. Every sample satisfies `COERCIVITY ≤ λ ≤ 1/COERCIVITY`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralDensity {
    m: usize,
    samples: Vec<CMat>,
    role: SpectrumRole,
}

impl SpectralDensity {
    pub fn new(samples: Vec<CMat>, role: SpectrumRole) -> Result<Self> {
        let m = samples
            .first()
            .map(|s| s.nrows())
            .ok_or_else(|| Error::DimensionMismatch("spectrum has no samples".into()))?;
        if m == 0 {
            return Err(Error::DimensionMismatch("spectrum samples are empty".into()));
        }
        let mut clean = Vec::with_capacity(samples.len());
        for (index, s) in samples.into_iter().enumerate() {
            if s.shape() != (m, m) {
                return Err(Error::DimensionMismatch(format!(
                    "sample {index} has shape {:?}, expected ({m}, {m})",
                    s.shape()
                )));
            }
            let asym = asymmetry(&s);
            if !(asym <= HERMITIAN_TOLERANCE * s.norm().max(1.0)) {
                return Err(Error::NotHermitian { index, asymmetry: asym });
            }
            let h = hermitian_part(&s);
            let eig = eigenvalues_hermitian(&h);
            let (min, max) = (eig[0], eig[m - 1]);
            if !(min >= COERCIVITY && max <= 1.0 / COERCIVITY) {
                return Err(Error::NotCoercive { index, min, max });
            }
            clean.push(h);
        }
        Ok(Self { m, samples: clean, role })
    }

    /// Constant spectrum `Φ(θ) ≡ value`.
    pub fn constant(value: &CMat, grid_points: usize, role: SpectrumRole) -> Result<Self> {
        Self::new(vec![value.clone(); grid_points], role)
    }

    pub fn identity(m: usize, grid_points: usize, role: SpectrumRole) -> Result<Self> {
        Self::constant(&CMat::identity(m, m), grid_points, role)
    }

    /// Samples `f(θ_k)` on the grid.
    pub fn from_fn(grid_points: usize, role: SpectrumRole, f: impl Fn(f64) -> CMat) -> Result<Self> {
        Self::new((0..grid_points).map(|k| f(grid_angle(k, grid_points))).collect(), role)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn grid_len(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[CMat] {
        &self.samples
    }

    pub fn role(&self) -> SpectrumRole {
        self.role
    }

    pub fn with_role(mut self, role: SpectrumRole) -> Self {
        self.role = role;
        self
    }

    /// Scalar samples; only meaningful when `m = 1`.
    pub fn scalar_samples(&self) -> Result<Vec<f64>> {
        if self.m != 1 {
            return Err(Error::NotScalar(self.m));
        }
        Ok(self.samples.iter().map(|s| s[(0, 0)].re).collect())
    }

    /// Pointwise Hermitian square root.
    pub fn hermitian_factor(&self) -> SpectralFactor {
        SpectralFactor {
            samples: self.samples.iter().map(|s| hermitian_sqrt(s, COERCIVITY)).collect(),
        }
    }

    /// `max_k ‖Φ_k - Ψ_k‖₂`, the sampled L∞ distance.
    pub fn sup_distance(&self, other: &SpectralDensity) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| spectral_norm(&(a - b)))
            .fold(0.0, f64::max))
    }

    pub fn check_compatible(&self, other: &SpectralDensity) -> Result<()> {
        if self.grid_len() != other.grid_len() {
            return Err(Error::GridMismatch { expected: self.grid_len(), found: other.grid_len() });
        }
        if self.m != other.m {
            return Err(Error::DimensionMismatch(format!(
                "spectra have sizes {} and {}",
                self.m, other.m
            )));
        }
        Ok(())
    }
}

/// Square spectral factor samples `W_k` with `W_k W_k* = Φ_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralFactor {
    samples: Vec<CMat>,
}

impl SpectralFactor {
    pub fn from_samples(samples: Vec<CMat>) -> Self {
        Self { samples }
    }

    pub fn samples(&self) -> &[CMat] {
        &self.samples
    }

    /// `W_k W_k*` at every grid point.
    pub fn spectrum_samples(&self) -> Vec<CMat> {
        self.samples.iter().map(|w| hermitian_part(&(w * w.adjoint()))).collect()
    }

    /// Largest deviation `max_k ‖W_k W_k* - Φ_k‖_F`.
    pub fn factorization_error(&self, phi: &SpectralDensity) -> f64 {
        self.spectrum_samples()
            .iter()
            .zip(phi.samples())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}
