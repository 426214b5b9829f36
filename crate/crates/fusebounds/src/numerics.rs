//! Dense symmetric PSD primitives: matrix square roots, the trace term of
//! the moment outer bound, and finite-difference gradients.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative tolerance for the symmetry check.
const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues above `-PSD_HARD_TOL * max_abs_entry` are treated as roundoff
/// and clamped to zero; anything below is a corrupted input, not noise.
const PSD_HARD_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {diff:.3e} exceeds tolerance")]
    NonSymmetric { i: usize, j: usize, diff: f64 },
    #[error("matrix is indefinite: eigenvalue {eigenvalue:.3e} below -{tol:.3e}")]
    IndefiniteInput { eigenvalue: f64, tol: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("entry count {len} does not match dimension {dim}")]
    BadShape { len: usize, dim: usize },
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },
    #[error("function evaluation returned a non-finite value at perturbed point")]
    NonFiniteEvaluation,
}

/// A symmetric positive semi-definite matrix in row-major storage.
///
/// Symmetry is enforced at construction; positive semi-definiteness (up to
/// roundoff) is enforced wherever an eigendecomposition is taken.
#[derive(Debug, Clone, PartialEq)]
pub struct SymPsdMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymPsdMatrix {
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self, NumericsError> {
        if entries.len() != dim * dim {
            return Err(NumericsError::BadShape { len: entries.len(), dim });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(NumericsError::NonFinite { context: "matrix entries" });
        }
        let scale = entries.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..dim {
            for j in (i + 1)..dim {
                let diff = (entries[i * dim + j] - entries[j * dim + i]).abs();
                if diff > SYMMETRY_TOL * scale {
                    return Err(NumericsError::NonSymmetric { i, j, diff });
                }
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self { dim, entries }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut entries = vec![0.0; dim * dim];
        for (i, v) in diag.iter().enumerate() {
            entries[i * dim + i] = *v;
        }
        Self { dim, entries }
    }

    /// Scalar (1x1) matrix.
    pub fn scalar(value: f64) -> Self {
        Self { dim: 1, entries: vec![value] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    /// Eigenvalues in the order nalgebra returns them (unsorted).
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.to_dmatrix().symmetric_eigen().eigenvalues.iter().copied().collect()
    }
}

fn from_dmatrix_symmetrized(m: &DMatrix<f64>) -> SymPsdMatrix {
    let dim = m.nrows();
    let mut entries = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            entries[i * dim + j] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
    SymPsdMatrix { dim, entries }
}

/// Symmetric PSD square root via eigendecomposition.
///
/// Negative eigenvalues within roundoff of zero are clamped; eigenvalues
/// below `-1e-6 * max_abs_entry` signal a corrupted covariance and error out.
/// The symmetric root is unique, so the result is deterministic.
pub fn sym_psd_sqrt(a: &SymPsdMatrix) -> Result<SymPsdMatrix, NumericsError> {
    let scale = a.max_abs_entry();
    let eig = a.to_dmatrix().symmetric_eigen();
    let tol = PSD_HARD_TOL * scale;
    let mut sqrt_vals = DVector::zeros(a.dim);
    for (idx, lambda) in eig.eigenvalues.iter().enumerate() {
        if *lambda < -tol {
            return Err(NumericsError::IndefiniteInput { eigenvalue: *lambda, tol });
        }
        sqrt_vals[idx] = lambda.max(0.0).sqrt();
    }
    let q = &eig.eigenvectors;
    let root = q * DMatrix::from_diagonal(&sqrt_vals) * q.transpose();
    Ok(from_dmatrix_symmetrized(&root))
}

/// The trace term of the moment outer bound:
/// `tr sqrt( sqrt(vz) * vy * sqrt(vz) )`.
///
/// For 1x1 inputs this is exactly `sqrt(vy * vz)` and a dedicated scalar path
/// avoids the eigendecomposition.
pub fn cs_variance_term(vy: &SymPsdMatrix, vz: &SymPsdMatrix) -> Result<f64, NumericsError> {
    if vy.dim != vz.dim {
        return Err(NumericsError::DimensionMismatch { left: vy.dim, right: vz.dim });
    }
    if vy.dim == 1 {
        return Ok((vy.entries[0] * vz.entries[0]).max(0.0).sqrt());
    }
    let sz = sym_psd_sqrt(vz)?;
    let inner = sz.to_dmatrix() * vy.to_dmatrix() * sz.to_dmatrix();
    let inner = from_dmatrix_symmetrized(&inner);
    Ok(sym_psd_sqrt(&inner)?.trace())
}

/// Central-difference gradient with per-component relative step
/// `h_i = rel_step * max(1, |point_i|)`.
pub fn central_diff_gradient<F>(
    f: F,
    point: &[f64],
    rel_step: f64,
) -> Result<Vec<f64>, NumericsError>
where
    F: Fn(&[f64]) -> f64,
{
    let mut grad = Vec::with_capacity(point.len());
    let mut work = point.to_vec();
    for i in 0..point.len() {
        let h = rel_step * point[i].abs().max(1.0);
        work[i] = point[i] + h;
        let up = f(&work);
        work[i] = point[i] - h;
        let down = f(&work);
        work[i] = point[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(NumericsError::NonFiniteEvaluation);
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}
