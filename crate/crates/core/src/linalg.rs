//! Dense complex linear-algebra helpers and the [`HermitianMatrix`] type.
//!
//! H(p) is treated as a real vector space of dimension p² with the inner
//! product `<X, Y> = tr(XY)`. The coordinate map used throughout the crate is
//! the isometry
//!
//! ```text
//! X  ->  [X_00, .., X_{p-1,p-1}, √2 Re X_01, √2 Im X_01, √2 Re X_02, ..]
//! ```
//!
//! so Euclidean norms of coordinate vectors are Frobenius norms of matrices.

use std::f64::consts::SQRT_2;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real_to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|x| c(x, 0.0))
}

/// `(M + M*) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Frobenius norm of `M - M*`.
pub fn asymmetry(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted ascending.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(m.nrows(), m.ncols(), |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vectors)
}

pub fn eigenvalues_hermitian(m: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(hermitian_part(m)).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn min_eigenvalue(m: &CMat) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].re;
    }
    eigenvalues_hermitian(m)[0]
}

/// Applies `f` to the eigenvalues of a Hermitian matrix.
pub fn hermitian_fn(m: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    if m.nrows() == 1 {
        return CMat::from_element(1, 1, c(f(m[(0, 0)].re), 0.0));
    }
    let (values, vectors) = eigh(m);
    let mut scaled = vectors.clone();
    for (j, lambda) in values.iter().enumerate() {
        let s = f(*lambda);
        scaled.column_mut(j).scale_mut(s);
    }
    hermitian_part(&(scaled * vectors.adjoint()))
}

/// Hermitian square root with eigenvalues clamped below at `floor`.
pub fn hermitian_sqrt(m: &CMat, floor: f64) -> CMat {
    hermitian_fn(m, |x| x.max(floor).sqrt())
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    SVD::new(m.clone(), false, false).singular_values.max()
}

/// Numerical rank with singular-value cutoff `p · σ_max · rel_tol`.
pub fn numerical_rank(m: &CMat, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = SVD::new(m.clone(), false, false).singular_values;
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    let cutoff = m.nrows().max(m.ncols()) as f64 * smax * rel_tol;
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Thin SVD `M = U diag(s) V*` with `s` non-increasing.
///
/// nalgebra's SVD can return inaccurate singular vectors for rank-deficient
/// input (its singular values stay accurate), so whenever vectors are needed
/// the factorization comes from faer.
pub fn thin_svd<T>(m: &DMatrix<T>) -> Result<(DMatrix<T>, Vec<f64>, DMatrix<T>)>
where
    T: faer::traits::ComplexField<Real = f64> + nalgebra::Scalar + Copy,
{
    let f = faer::Mat::<T>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let svd = f.thin_svd().map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let (u, v) = (svd.U(), svd.V());
    let s = svd.S().column_vector();
    let values = (0..s.nrows()).map(|i| faer::traits::math_utils::real(&s[i])).collect();
    Ok((
        DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)]),
        values,
        DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)]),
    ))
}

/// Minimum-norm least-squares solution of `M x = rhs`.
pub fn least_squares(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let (u, s, v) = thin_svd(m)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let eps = smax * 1e-12 * m.nrows().max(m.ncols()) as f64;
    let mut coeffs = u.transpose() * rhs;
    for (c, &sv) in coeffs.iter_mut().zip(&s) {
        *c = if sv > eps { *c / sv } else { 0.0 };
    }
    Ok(v * coeffs)
}

/// `tr(XY)` for square complex matrices, without forming the product.
#[inline]
pub fn trace_of_product(x: &CMat, y: &CMat) -> C64 {
    let p = x.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for a in 0..p {
        for b in 0..p {
            acc += x[(a, b)] * y[(b, a)];
        }
    }
    acc
}

/// Real coordinates of a Hermitian matrix (see module docs).
pub fn hvec(m: &CMat) -> Vec<f64> {
    let p = m.nrows();
    let mut out = Vec::with_capacity(p * p);
    for i in 0..p {
        out.push(m[(i, i)].re);
    }
    for i in 0..p {
        for j in (i + 1)..p {
            out.push(SQRT_2 * m[(i, j)].re);
            out.push(SQRT_2 * m[(i, j)].im);
        }
    }
    out
}

/// Inverse of [`hvec`].
pub fn unhvec(p: usize, coords: &[f64]) -> CMat {
    assert_eq!(coords.len(), p * p, "coordinate vector has wrong length");
    let mut m = CMat::zeros(p, p);
    for i in 0..p {
        m[(i, i)] = c(coords[i], 0.0);
    }
    let mut idx = p;
    for i in 0..p {
        for j in (i + 1)..p {
            let z = c(coords[idx], coords[idx + 1]) / SQRT_2;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
            idx += 2;
        }
    }
    m
}

/// A complex Hermitian matrix. The stored matrix equals its adjoint exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<[f64; 2]>>", try_from = "Vec<Vec<[f64; 2]>>")]
pub struct HermitianMatrix(CMat);

impl HermitianMatrix {
    /// Builds from the upper triangle of `m`; the strict lower triangle is
    /// overwritten with conjugates and the diagonal imaginary parts dropped.
    pub fn from_upper(m: &CMat) -> Self {
        assert!(m.is_square(), "Hermitian matrix must be square");
        let p = m.nrows();
        let mut out = m.clone();
        for i in 0..p {
            out[(i, i)] = c(m[(i, i)].re, 0.0);
            for j in (i + 1)..p {
                out[(j, i)] = m[(i, j)].conj();
            }
        }
        HermitianMatrix(out)
    }

    /// Hermitian part of `m`, i.e. `(m + m*)/2`.
    pub fn symmetrize(m: &CMat) -> Self {
        Self::from_upper(&hermitian_part(m))
    }

    /// Accepts `m` if `‖m - m*‖_F ≤ tol · max(1, ‖m‖_F)`.
    pub fn try_new(m: CMat, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "expected a square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let asym = asymmetry(&m);
        if asym > tol * m.norm().max(1.0) {
            return Err(Error::NotHermitian { index: 0, asymmetry: asym });
        }
        Ok(Self::symmetrize(&m))
    }

    pub fn zeros(p: usize) -> Self {
        HermitianMatrix(CMat::zeros(p, p))
    }

    pub fn identity(p: usize) -> Self {
        HermitianMatrix(CMat::identity(p, p))
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let mut m = CMat::zeros(d.len(), d.len());
        for (i, x) in d.iter().enumerate() {
            m[(i, i)] = c(*x, 0.0);
        }
        HermitianMatrix(m)
    }

    pub fn from_coords(p: usize, coords: &[f64]) -> Self {
        HermitianMatrix(unhvec(p, coords))
    }

    pub fn coords(&self) -> Vec<f64> {
        hvec(&self.0)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    /// `tr(self · other)`, real for Hermitian arguments.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        trace_of_product(&self.0, &other.0).re
    }

    pub fn frobenius(&self) -> f64 {
        self.0.norm()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigenvalues_hermitian(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        HermitianMatrix(self.0.scale(s))
    }

    /// Sandwich `W* · self · W`.
    pub fn congruence(&self, w: &CMat) -> CMat {
        w.adjoint() * &self.0 * w
    }
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, rhs: f64) -> HermitianMatrix {
        self.scale(rhs)
    }
}

impl From<HermitianMatrix> for Vec<Vec<[f64; 2]>> {
    fn from(h: HermitianMatrix) -> Self {
        matrix_to_pairs(&h.0)
    }
}

impl TryFrom<Vec<Vec<[f64; 2]>>> for HermitianMatrix {
    type Error = String;
    fn try_from(rows: Vec<Vec<[f64; 2]>>) -> std::result::Result<Self, String> {
        let m = pairs_to_matrix(&rows)?;
        HermitianMatrix::try_new(m, 1e-12).map_err(|e| e.to_string())
    }
}

/// Row-major `[re, im]` encoding.
pub fn matrix_to_pairs(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn pairs_to_matrix(rows: &[Vec<[f64; 2]>]) -> std::result::Result<CMat, String> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err("matrix has no rows".into());
    }
    let ncols = rows[0].len();
    if ncols == 0 {
        return Err("matrix has no columns".into());
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(format!("row {i} has {} entries, expected {ncols}", r.len()));
    }
    Ok(CMat::from_fn(nrows, ncols, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

/// Serde adapter for complex matrices in the row-major `[re, im]` encoding.
pub mod serde_cmat {
    use super::{matrix_to_pairs, pairs_to_matrix, CMat};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        matrix_to_pairs(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        pairs_to_matrix(&rows).map_err(serde::de::Error::custom)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(m: &Option<CMat>, s: S) -> Result<S::Ok, S::Error> {
            m.as_ref().map(matrix_to_pairs).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<CMat>, D::Error> {
            Option::<Vec<Vec<[f64; 2]>>>::deserialize(d)?
                .map(|rows| pairs_to_matrix(&rows).map_err(serde::de::Error::custom))
                .transpose()
        }
    }
}
