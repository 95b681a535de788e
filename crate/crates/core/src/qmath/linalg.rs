//! Dense complex linear algebra helpers built on `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Eigenvalues in `[-PSD_CLAMP, 0)` are treated as exact zeros.
pub const PSD_CLAMP: f64 = 1e-10;

pub const ZERO: C64 = Complex { re: 0.0, im: 0.0 };
pub const ONE: C64 = Complex { re: 1.0, im: 0.0 };

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

#[inline]
pub fn real(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

/// `(m + m†) / 2`
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Spectral decomposition of a Hermitian matrix, eigenvalues in descending order.
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, aligned with `values`.
    pub vectors: CMatrix,
}

pub fn eigh(m: &CMatrix) -> HermitianEigen {
    let n = m.nrows();
    if n == 0 {
        return HermitianEigen { values: Vec::new(), vectors: CMatrix::zeros(0, 0) };
    }
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    HermitianEigen { values, vectors }
}

/// Eigenvalues of a Hermitian matrix in descending order.
pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = hermitize(m).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let HermitianEigen { values, vectors } = eigh(m);
    let mut scaled = vectors.clone();
    for (k, &v) in values.iter().enumerate() {
        let fv = real(f(v));
        for z in scaled.column_mut(k).iter_mut() {
            *z *= fv;
        }
    }
    scaled * vectors.adjoint()
}

/// Principal square root of a PSD matrix (negative drift clamped).
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    hermitian_map(m, |v| v.max(0.0).sqrt())
}

/// Base-2 logarithm on the support; eigenvalues below `cutoff` map to zero.
pub fn log2_on_support(m: &CMatrix, cutoff: f64) -> CMatrix {
    hermitian_map(m, |v| if v > cutoff { v.log2() } else { 0.0 })
}

/// Trace norm `‖m‖₁` of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &CMatrix) -> f64 {
    eigvalsh(m).iter().map(|v| v.abs()).sum()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    a.kronecker(b)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.trace()
}

/// Frobenius norm of `m m† - 1`.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    (m * m.adjoint() - identity(m.nrows())).norm()
}

/// Frobenius norm of `m† m - 1` (isometry check for tall matrices).
pub fn isometry_defect(m: &CMatrix) -> f64 {
    (m.adjoint() * m - identity(m.ncols())).norm()
}

/// Maximum entry-wise deviation from Hermiticity.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Matrix exponential of a Hermitian matrix.
pub fn expm_hermitian(m: &CMatrix) -> CMatrix {
    hermitian_map(m, f64::exp)
}

/// Matrix from row-major nested slices of `(re, im)` pairs.
pub fn from_rows(rows: &[Vec<C64>]) -> CMatrix {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(nr, nc, |i, j| rows[i][j])
}

/// Projector `|v><v|`.
pub fn outer(v: &CVector) -> CMatrix {
    v * v.adjoint()
}
