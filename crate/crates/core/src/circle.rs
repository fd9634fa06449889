//! State-space filters, transfer-function samples on the unit circle and
//! circle quadrature with respect to the normalized Lebesgue measure `dθ/2π`.

use std::f64::consts::TAU;

use nalgebra::Schur;

use crate::error::{Error, Result};
use crate::linalg::{c, numerical_rank, CMat, HermitianMatrix, C64};

/// Spectral radius of `A` must not exceed `1 - STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-9;
/// Relative singular-value cutoff used for rank decisions.
pub const RANK_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_GRID_POINTS: usize = 512;
pub const MIN_GRID_POINTS: usize = 64;

/// The filter `x(t+1) = A x(t) + B y(t)` with `G(z) = (zI - A)⁻¹ B`.
///
/// Construction checks stability, full column rank of `B` and reachability;
/// the certificates are kept on the value.
#[derive(Clone, Debug)]
pub struct StateSpaceFilter {
    a: CMat,
    b: CMat,
    spectral_radius: f64,
    b_rank: usize,
    reachability_rank: usize,
}

impl StateSpaceFilter {
    pub fn new(a: CMat, b: CMat) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "B must be {n}xm with m >= 1, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        let m = b.ncols();
        if m > n {
            return Err(Error::RankDeficientB { rank: n, expected: m });
        }

        let spectral_radius = spectral_radius(&a)?;
        if !(spectral_radius <= 1.0 - STABILITY_MARGIN) {
            return Err(Error::NotStable { spectral_radius, margin: STABILITY_MARGIN });
        }

        let b_rank = numerical_rank(&b, RANK_TOLERANCE);
        if b_rank < m {
            return Err(Error::RankDeficientB { rank: b_rank, expected: m });
        }

        let reachability_rank = numerical_rank(&reachability_matrix(&a, &b), RANK_TOLERANCE);
        if reachability_rank < n {
            return Err(Error::NotReachable { rank: reachability_rank, expected: n });
        }

        Ok(Self { a, b, spectral_radius, b_rank, reachability_rank })
    }

    /// State dimension `n`.
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Input dimension `m`.
    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn b_rank(&self) -> usize {
        self.b_rank
    }

    pub fn reachability_rank(&self) -> usize {
        self.reachability_rank
    }

    /// `G(z) = (zI - A)⁻¹ B` at a single point.
    pub fn transfer_at(&self, z: C64) -> Option<CMat> {
        let n = self.state_dim();
        let resolvent = CMat::identity(n, n) * z - &self.a;
        resolvent.lu().solve(&self.b)
    }

    /// Samples `G` on the uniform grid `θ_k = 2πk/K`.
    pub fn eval_transfer(&self, grid_points: usize) -> Result<FrequencyGrid> {
        if grid_points < MIN_GRID_POINTS || !grid_points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(grid_points));
        }
        let thetas: Vec<f64> = (0..grid_points).map(|k| grid_angle(k, grid_points)).collect();
        let transfer = thetas
            .iter()
            .map(|&theta| {
                self.transfer_at(C64::from_polar(1.0, theta))
                    .filter(|g| g.iter().all(|x| x.is_finite()))
                    .ok_or(Error::SingularResolvent { theta })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FrequencyGrid { n: self.state_dim(), m: self.input_dim(), thetas, transfer })
    }

    /// Solution of `Σ - AΣA* = BB*` by a direct vectorized solve.
    ///
    /// With column-major `vec`, `vec(AΣA*) = (conj(A) ⊗ A) vec(Σ)`.
    pub fn lyapunov_sigma(&self) -> HermitianMatrix {
        let n = self.state_dim();
        let kron = self.a.map(|x| x.conj()).kronecker(&self.a);
        let system = CMat::identity(n * n, n * n) - kron;
        let bbt = &self.b * self.b.adjoint();
        let rhs = nalgebra::DVector::from_iterator(n * n, bbt.iter().copied());
        let sol = system
            .lu()
            .solve(&rhs)
            .expect("Lyapunov operator is invertible for a stable state matrix");
        HermitianMatrix::symmetrize(&CMat::from_iterator(n, n, sol.iter().copied()))
    }
}

/// `θ_k = 2πk/K`; `grid_angle(2k, 2K) == grid_angle(k, K)` bit-for-bit.
#[inline]
pub fn grid_angle(k: usize, grid_points: usize) -> f64 {
    TAU * k as f64 / grid_points as f64
}

fn spectral_radius(a: &CMat) -> Result<f64> {
    if a.nrows() == 1 {
        return Ok(a[(0, 0)].norm());
    }
    let eig = Schur::new(a.clone())
        .eigenvalues()
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    Ok(eig.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// `[B, AB, …, A^{n-1}B]`.
pub fn reachability_matrix(a: &CMat, b: &CMat) -> CMat {
    let n = a.nrows();
    let m = b.ncols();
    let mut out = CMat::zeros(n, n * m);
    let mut block = b.clone();
    for i in 0..n {
        out.view_mut((0, i * m), (n, m)).copy_from(&block);
        block = a * block;
    }
    out
}

/// Transfer samples `G_k = G(e^{jθ_k})` on a uniform grid of `K` points.
#[derive(Clone, Debug)]
pub struct FrequencyGrid {
    n: usize,
    m: usize,
    thetas: Vec<f64>,
    transfer: Vec<CMat>,
}

impl FrequencyGrid {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn transfer(&self) -> &[CMat] {
        &self.transfer
    }

    pub fn check_len(&self, found: usize) -> Result<()> {
        if found != self.len() {
            return Err(Error::GridMismatch { expected: self.len(), found });
        }
        Ok(())
    }
}

/// `(1/K) Σ_k samples_k`, the periodic trapezoid rule for `∫ · dθ/2π`.
pub fn integrate_circle(samples: &[CMat]) -> Result<CMat> {
    let first = samples
        .first()
        .ok_or_else(|| Error::DimensionMismatch("no samples to integrate".into()))?;
    let shape = first.shape();
    let mut acc = CMat::zeros(shape.0, shape.1);
    for (k, s) in samples.iter().enumerate() {
        if s.shape() != shape {
            return Err(Error::DimensionMismatch(format!(
                "sample {k} has shape {:?}, expected {shape:?}",
                s.shape()
            )));
        }
        acc += s;
    }
    Ok(acc.unscale(samples.len() as f64))
}

/// Scalar version of [`integrate_circle`].
pub fn integrate_scalar(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

pub(crate) fn scalar(x: f64) -> CMat {
    CMat::from_element(1, 1, c(x, 0.0))
}
