//! The moment operator `Γ(Φ) = ∫ G Φ G*`, its adjoint, the subspace
//! `Range Γ ⊂ H(n)`, feasibility certificates and covariance repair.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::circle::{integrate_circle, FrequencyGrid, StateSpaceFilter};
use crate::error::{Error, Result};
use crate::linalg::{c, hvec, least_squares, serde_cmat, thin_svd, CMat, HermitianMatrix};
use crate::spectrum::SpectralDensity;

/// Relative feasibility tolerance.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-8;
/// Relative positive-definiteness floor: `λ_min ≥ PD_FLOOR · tr(Σ)/n`.
pub const PD_FLOOR: f64 = 1e-6;
/// Relative singular-value cutoff separating Range Γ from its complement.
pub const RANGE_CUTOFF: f64 = 1e-10;

const BISECTION_STEPS: usize = 60;

/// `(1/K) Σ_k G_k Φ_k G_k*`.
pub fn gamma_apply(grid: &FrequencyGrid, phi: &SpectralDensity) -> Result<HermitianMatrix> {
    if phi.dim() != grid.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "spectrum is {0}x{0}, filter has m = {1}",
            phi.dim(),
            grid.input_dim()
        )));
    }
    gamma_apply_samples(grid, phi.samples())
}

/// [`gamma_apply`] on raw `m×m` samples that need not be a certified spectrum.
pub fn gamma_apply_samples(grid: &FrequencyGrid, samples: &[CMat]) -> Result<HermitianMatrix> {
    grid.check_len(samples.len())?;
    let terms: Vec<CMat> = grid
        .transfer()
        .iter()
        .zip(samples)
        .map(|(g, phi)| g * phi * g.adjoint())
        .collect();
    Ok(HermitianMatrix::symmetrize(&integrate_circle(&terms)?))
}

/// Samples of `θ ↦ G*(e^{jθ}) Λ G(e^{jθ})`.
pub fn gamma_adjoint(grid: &FrequencyGrid, lambda: &HermitianMatrix) -> Vec<CMat> {
    grid.transfer()
        .iter()
        .map(|g| HermitianMatrix::symmetrize(&lambda.congruence(g)).into_matrix())
        .collect()
}

/// Orthonormal basis (under `tr(XY)`) of Range Γ, together with one of its
/// orthogonal complement in H(n).
///
/// Computed from the kernel of the sampled adjoint `X ↦ (G_k* X G_k)_k`,
/// which is exactly `Range Γ⊥`.
#[derive(Clone, Debug)]
pub struct RangeGammaBasis {
    n: usize,
    elements: Vec<HermitianMatrix>,
    complement: Vec<HermitianMatrix>,
    singular_values: Vec<f64>,
    grid_points: usize,
}

impl RangeGammaBasis {
    pub fn compute(grid: &FrequencyGrid) -> Self {
        let n = grid.state_dim();
        let m = grid.input_dim();
        let dim = n * n;
        let k = grid.len();
        let rows = (k * m * m).max(dim);
        let scale = 1.0 / (k as f64).sqrt();

        let mut map = DMatrix::<f64>::zeros(rows, dim);
        for j in 0..dim {
            let mut unit = vec![0.0; dim];
            unit[j] = 1.0;
            let x = HermitianMatrix::from_coords(n, &unit);
            for (idx, g) in grid.transfer().iter().enumerate() {
                let sample = hvec(&x.congruence(g));
                for (r, v) in sample.iter().enumerate() {
                    map[(idx * m * m + r, j)] = v * scale;
                }
            }
        }

        let (_, singular_values, v) = thin_svd(&map).expect("SVD of a finite matrix converges");
        let smax = singular_values.first().copied().unwrap_or(0.0);
        let cutoff = RANGE_CUTOFF * smax;

        let mut elements = Vec::new();
        let mut complement = Vec::new();
        for (i, &s) in singular_values.iter().enumerate() {
            let mut coords: Vec<f64> = v.column(i).iter().copied().collect();
            orient(&mut coords);
            let h = HermitianMatrix::from_coords(n, &coords);
            if s > cutoff {
                elements.push(h);
            } else {
                complement.push(h);
            }
        }
        Self { n, elements, complement, singular_values, grid_points: k }
    }

    /// `d = dim Range Γ`.
    pub fn dim(&self) -> usize {
        self.elements.len()
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    pub fn elements(&self) -> &[HermitianMatrix] {
        &self.elements
    }

    /// Orthonormal basis of `Range Γ⊥`.
    pub fn complement(&self) -> &[HermitianMatrix] {
        &self.complement
    }

    /// Singular values of the sampled adjoint map, descending.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Coordinates `⟨X, L_i⟩`.
    pub fn coordinates(&self, x: &HermitianMatrix) -> Vec<f64> {
        self.elements.iter().map(|l| l.inner(x)).collect()
    }

    /// `Σ_i c_i L_i`.
    pub fn materialize(&self, coords: &[f64]) -> HermitianMatrix {
        assert_eq!(coords.len(), self.dim(), "coordinate vector has wrong length");
        let mut acc = vec![0.0; self.n * self.n];
        for (ci, l) in coords.iter().zip(&self.elements) {
            for (a, v) in acc.iter_mut().zip(l.coords()) {
                *a += ci * v;
            }
        }
        HermitianMatrix::from_coords(self.n, &acc)
    }

    /// Orthogonal projection onto Range Γ.
    pub fn project(&self, x: &HermitianMatrix) -> HermitianMatrix {
        self.materialize(&self.coordinates(x))
    }
}

/// Orthogonal projection of `sigma` onto Range Γ.
pub fn project_range(sigma: &HermitianMatrix, basis: &RangeGammaBasis) -> Result<HermitianMatrix> {
    if sigma.dim() != basis.state_dim() {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {0}x{0}, basis lives in H({1})",
            sigma.dim(),
            basis.state_dim()
        )));
    }
    Ok(basis.project(sigma))
}

// Fixes the sign ambiguity of singular vectors: the largest-magnitude
// coordinate is made positive.
fn orient(coords: &mut [f64]) {
    let pivot = coords
        .iter()
        .copied()
        .fold(0.0f64, |best, x| if x.abs() > best.abs() + 1e-12 { x } else { best });
    if pivot < 0.0 {
        coords.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Outcome of testing `Σ - AΣA* = BH + H*B*` together with `Σ ∈ Range Γ`
/// and `Σ > 0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeasibilityCertificate {
    #[serde(with = "serde_cmat::option")]
    pub h: Option<CMat>,
    pub equation_residual: f64,
    pub projection_residual: f64,
    pub min_eigenvalue: f64,
    pub sigma_norm: f64,
    pub tolerance: f64,
    pub feasible: bool,
}

impl FeasibilityCertificate {
    pub fn is_positive_definite(&self) -> bool {
        self.min_eigenvalue > 0.0
    }

    pub fn in_range(&self) -> bool {
        self.projection_residual <= self.tolerance * self.sigma_norm
    }
}

/// Least-squares solve for `H` plus both residuals and the positivity check.
pub fn feasibility(
    filter: &StateSpaceFilter,
    sigma: &HermitianMatrix,
    basis: &RangeGammaBasis,
) -> Result<FeasibilityCertificate> {
    let n = filter.state_dim();
    let m = filter.input_dim();
    if sigma.dim() != n || basis.state_dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "Sigma is {0}x{0}, filter state dimension is {n}",
            sigma.dim()
        )));
    }
    let a = filter.a();
    let b = filter.b();
    let s = sigma.as_matrix();
    let rhs = DVector::from_vec(hvec(&(s - a * s * a.adjoint())));

    // real parametrization of H: (re, im) of each entry
    let unknowns = 2 * m * n;
    let mut map = DMatrix::<f64>::zeros(n * n, unknowns);
    for p in 0..m {
        for q in 0..n {
            for (part, z) in [c(1.0, 0.0), c(0.0, 1.0)].into_iter().enumerate() {
                let mut h = CMat::zeros(m, n);
                h[(p, q)] = z;
                let bh = b * &h;
                let col = hvec(&(&bh + bh.adjoint()));
                map.set_column(2 * (p * n + q) + part, &DVector::from_vec(col));
            }
        }
    }
    let x = least_squares(&map, &rhs)?;
    let equation_residual = (&map * &x - &rhs).norm();
    let h = CMat::from_fn(m, n, |p, q| c(x[2 * (p * n + q)], x[2 * (p * n + q) + 1]));

    let projection_residual = (sigma - &basis.project(sigma)).frobenius();
    let min_eigenvalue = sigma.min_eigenvalue();
    let sigma_norm = sigma.frobenius();
    let bound = FEASIBILITY_TOLERANCE * sigma_norm;
    let equation_ok = equation_residual <= bound;
    let feasible = projection_residual <= bound && equation_ok && min_eigenvalue > 0.0;
    Ok(FeasibilityCertificate {
        h: equation_ok.then_some(h),
        equation_residual,
        projection_residual,
        min_eigenvalue,
        sigma_norm,
        tolerance: FEASIBILITY_TOLERANCE,
        feasible,
    })
}

/// How a covariance estimate was moved into P_Γ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairInfo {
    pub method: String,
    /// Weight `t` of `Γ(I)` in `(1-t)Π(Σ̂) + tΓ(I)`; zero when no blending was needed.
    pub blend_weight: f64,
    /// `‖Σ̂ - Π(Σ̂)‖_F`.
    pub projection_residual: f64,
    pub pd_floor: f64,
}

pub const REPAIR_METHOD: &str = "project-then-blend-toward-gamma-identity";

/// A Hermitian `Σ` certified to lie in `P_Γ = {Σ ∈ Range Γ | Σ > 0}`.
#[derive(Clone, Debug)]
pub struct CovarianceInPGamma {
    sigma: HermitianMatrix,
    certificate: FeasibilityCertificate,
    repair: Option<RepairInfo>,
}

impl CovarianceInPGamma {
    /// Certifies `sigma` as-is; fails with [`Error::Infeasible`] otherwise.
    pub fn certify(filter: &StateSpaceFilter, sigma: HermitianMatrix, basis: &RangeGammaBasis) -> Result<Self> {
        let certificate = feasibility(filter, &sigma, basis)?;
        if !certificate.feasible {
            return Err(Error::Infeasible(Box::new(certificate)));
        }
        Ok(Self { sigma, certificate, repair: None })
    }

    pub fn sigma(&self) -> &HermitianMatrix {
        &self.sigma
    }

    pub fn certificate(&self) -> &FeasibilityCertificate {
        &self.certificate
    }

    pub fn repair(&self) -> Option<&RepairInfo> {
        self.repair.as_ref()
    }
}

fn meets_floor(s: &HermitianMatrix) -> bool {
    let lambda_min = s.min_eigenvalue();
    lambda_min > 0.0 && lambda_min >= PD_FLOOR * s.trace() / s.dim() as f64
}

/// Moves an estimate `Σ̂` into P_Γ: project onto Range Γ, and if the
/// projection is not safely positive definite, blend it toward `Γ(I)` with
/// the smallest weight (found by bisection) that restores the floor.
pub fn nearest_feasible(
    sigma_hat: &HermitianMatrix,
    basis: &RangeGammaBasis,
    filter: &StateSpaceFilter,
) -> Result<CovarianceInPGamma> {
    let projected = project_range(sigma_hat, basis)?;
    let projection_residual = (sigma_hat - &projected).frobenius();

    let (sigma, blend_weight) = if meets_floor(&projected) {
        (projected, 0.0)
    } else {
        let anchor = basis.project(&filter.lyapunov_sigma());
        if !meets_floor(&anchor) {
            return Err(Error::RepairFailed);
        }
        let blend = |t: f64| &(&projected * (1.0 - t)) + &(&anchor * t);
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if meets_floor(&blend(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (blend(hi), hi)
    };
    let mut out = CovarianceInPGamma::certify(filter, sigma, basis).map_err(|_| Error::RepairFailed)?;
    out.repair = Some(RepairInfo {
        method: REPAIR_METHOD.to_string(),
        blend_weight,
        projection_residual,
        pd_floor: PD_FLOOR,
    });
    Ok(out)
}

/// A unit-norm element of Range Γ^⊥, if the complement is non-trivial.
pub fn complement_direction(basis: &RangeGammaBasis) -> Option<HermitianMatrix> {
    basis.complement().first().cloned()
}
