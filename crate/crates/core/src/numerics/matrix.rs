//! Row-major dense complex matrices and the Hermitian PSD wrapper.

use num_complex::Complex64;

use super::{eig_hermitian, NumericsError};

/// Relative tolerance for the conjugate-symmetry check of
/// [`HermitianPsdMatrix::try_new`] (relative to the largest entry magnitude).
pub const HERMITIAN_REL_TOL: f64 = 1e-10;
/// Eigenvalue floor for the positive-semidefiniteness check: the smallest
/// eigenvalue must be at least `-PSD_EIG_REL_TOL` times the largest magnitude.
pub const PSD_EIG_REL_TOL: f64 = 1e-8;

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Identity matrix of dimension `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Builds a matrix entry-by-entry from a closure.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data, validating shape and finiteness.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, NumericsError> {
        if data.len() != rows * cols {
            return Err(NumericsError::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        let m = Self { rows, cols, data };
        m.validate_finite()?;
        Ok(m)
    }

    /// Builds a matrix whose columns are the given vectors (all of equal length).
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self, NumericsError> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        for c in columns {
            if c.len() != rows {
                return Err(NumericsError::DimensionMismatch {
                    expected: rows,
                    actual: c.len(),
                });
            }
        }
        let mut m = Self::zeros(rows, cols);
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m.validate_finite()?;
        Ok(m)
    }

    /// Errors on the first non-finite entry, if any.
    pub fn validate_finite(&self) -> Result<(), NumericsError> {
        for r in 0..self.rows {
            for c in 0..self.cols {
                let v = self.at(r, c);
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(NumericsError::NonFinite { row: r, col: c });
                }
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    /// Copy of column `c`.
    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.at(r, c)).collect()
    }

    pub fn set_column(&mut self, c: usize, v: &[Complex64]) {
        assert_eq!(v.len(), self.rows, "column length mismatch");
        for (r, &x) in v.iter().enumerate() {
            self.set(r, c, x);
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.at(c, r).conj())
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.at(i, k);
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = out.at(i, j) + a * rhs.at(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    /// Matrix-vector product `self * v`.
    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.at(i, j) * v[j]).sum())
            .collect()
    }

    /// Product with the conjugate transpose: `self^H * v`.
    pub fn adjoint_matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.rows, "adjoint matvec dimension mismatch");
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.at(i, j).conj() * v[i]).sum())
            .collect()
    }

    /// Entrywise sum.
    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a + b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Entrywise difference.
    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| a - b)
            .collect();
        Self {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Scalar multiple.
    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Largest conjugate-asymmetry `|a_ij - conj(a_ji)|` over a square matrix.
    pub fn max_asymmetry(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                worst = worst.max((self.at(i, j) - self.at(j, i).conj()).norm());
            }
        }
        worst
    }
}

// --- Hermitian PSD wrapper ---------------------------------------------------

/// A Hermitian positive-semidefinite matrix.
///
/// Storage is exactly conjugate-symmetric with a real diagonal. Construction
/// either validates an arbitrary matrix ([`Self::try_new`]) or uses an
/// algebraic form that guarantees positive semidefiniteness (Gram products and
/// congruences), in which case the eigenvalue check is skipped.
#[derive(Debug, Clone)]
pub struct HermitianPsdMatrix {
    m: ComplexMatrix,
}

impl HermitianPsdMatrix {
    /// Validates conjugate symmetry (within [`HERMITIAN_REL_TOL`] relative to
    /// the largest entry) and positive semidefiniteness (smallest eigenvalue
    /// at least `-`[`PSD_EIG_REL_TOL`] times the spectral scale), then stores
    /// the symmetrized matrix.
    pub fn try_new(m: ComplexMatrix) -> Result<Self, NumericsError> {
        if m.rows() != m.cols() {
            return Err(NumericsError::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        m.validate_finite()?;
        let scale = m.max_abs();
        let asym = m.max_asymmetry();
        if asym > HERMITIAN_REL_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(NumericsError::NotHermitian {
                max_asymmetry: asym,
                tolerance: HERMITIAN_REL_TOL * scale,
            });
        }
        let sym = Self::symmetrized(&m);
        let eig = eig_hermitian(&sym.m)?;
        let lam_scale = eig
            .values
            .iter()
            .map(|v| v.abs())
            .fold(0.0_f64, f64::max);
        let min = *eig.values.last().unwrap_or(&0.0);
        if min < -PSD_EIG_REL_TOL * lam_scale {
            return Err(NumericsError::NotPositiveSemidefinite {
                min_eigenvalue: min,
                scale: lam_scale,
            });
        }
        Ok(sym)
    }

    fn symmetrized(m: &ComplexMatrix) -> Self {
        let n = m.rows();
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            out.set(i, i, Complex64::new(m.at(i, i).re, 0.0));
            for j in (i + 1)..n {
                let v = (m.at(i, j) + m.at(j, i).conj()) * 0.5;
                out.set(i, j, v);
                out.set(j, i, v.conj());
            }
        }
        Self { m: out }
    }

    /// Gram product `A A^H`, positive semidefinite by construction.
    pub fn from_gram(a: &ComplexMatrix) -> Self {
        let n = a.rows();
        let mut out = ComplexMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = Complex64::new(0.0, 0.0);
                for k in 0..a.cols() {
                    s += a.at(i, k) * a.at(j, k).conj();
                }
                if i == j {
                    out.set(i, i, Complex64::new(s.re, 0.0));
                } else {
                    out.set(i, j, s);
                    out.set(j, i, s.conj());
                }
            }
        }
        Self { m: out }
    }

    /// Congruence `F^H R F`, positive semidefinite by construction.
    pub fn from_congruence(f: &ComplexMatrix, r: &HermitianPsdMatrix) -> Self {
        assert_eq!(f.rows(), r.dim(), "congruence dimension mismatch");
        let t = r.m.mul(f); // R F, M x K
        let k = f.cols();
        let mut out = ComplexMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let mut s = Complex64::new(0.0, 0.0);
                for m in 0..f.rows() {
                    s += f.at(m, i).conj() * t.at(m, j);
                }
                if i == j {
                    out.set(i, i, Complex64::new(s.re, 0.0));
                } else {
                    out.set(i, j, s);
                    out.set(j, i, s.conj());
                }
            }
        }
        Self { m: out }
    }

    /// Rank-one outer product `v v^H`.
    pub fn from_outer(v: &[Complex64]) -> Self {
        let col = ComplexMatrix::from_columns(std::slice::from_ref(&v.to_vec()))
            .expect("finite vector");
        Self::from_gram(&col)
    }

    /// `c * I` with `c >= 0`.
    pub fn scaled_identity(n: usize, c: f64) -> Self {
        assert!(c >= 0.0, "scaled identity requires a nonnegative scale");
        Self {
            m: ComplexMatrix::identity(n).scaled(Complex64::new(c, 0.0)),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    /// Immutable view of the underlying matrix.
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    /// Quadratic form `v^H A v` (real for Hermitian `A`).
    pub fn quad_form(&self, v: &[Complex64]) -> f64 {
        let av = self.m.matvec(v);
        super::vdot(v, &av).re
    }

    /// Sum of two PSD matrices (PSD by construction).
    pub fn add(&self, rhs: &Self) -> Self {
        Self {
            m: self.m.add(&rhs.m),
        }
    }

    /// `A + c I` with `c >= 0`.
    pub fn add_scaled_identity(&self, c: f64) -> Self {
        assert!(c >= 0.0, "diagonal shift must be nonnegative to stay PSD");
        let mut m = self.m.clone();
        for i in 0..m.rows() {
            let v = m.at(i, i) + Complex64::new(c, 0.0);
            m.set(i, i, v);
        }
        Self { m }
    }

    /// `c * A` with `c >= 0`.
    pub fn scaled(&self, c: f64) -> Self {
        assert!(c >= 0.0, "PSD scaling must be nonnegative");
        Self {
            m: self.m.scaled(Complex64::new(c, 0.0)),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m.at(i, i).re).sum()
    }
}

// --- Cholesky and PD solves ---------------------------------------------------

/// Cholesky factorization `B = L L^H` of a Hermitian positive-definite matrix;
/// returns the lower-triangular factor.
///
/// # Errors
/// [`NumericsError::Singular`] if a pivot is not strictly positive, naming the
/// offending pivot value.
pub fn cholesky(b: &ComplexMatrix) -> Result<ComplexMatrix, NumericsError> {
    assert_eq!(b.rows(), b.cols(), "cholesky requires a square matrix");
    let n = b.rows();
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = b.at(j, j).re;
        for k in 0..j {
            d -= l.at(j, k).norm_sqr();
        }
        if d <= 0.0 {
            return Err(NumericsError::Singular { eigenvalue: d });
        }
        let ljj = d.sqrt();
        l.set(j, j, Complex64::new(ljj, 0.0));
        for i in (j + 1)..n {
            let mut s = b.at(i, j);
            for k in 0..j {
                s -= l.at(i, k) * l.at(j, k).conj();
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(l)
}

/// Solves `L y = b` for lower-triangular `L`.
pub(crate) fn forward_sub(l: &ComplexMatrix, b: &[Complex64]) -> Vec<Complex64> {
    let n = l.rows();
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.at(i, k) * y[k];
        }
        y[i] = s / l.at(i, i);
    }
    y
}

/// Solves `L^H x = b` for lower-triangular `L`.
pub(crate) fn adjoint_back_sub(l: &ComplexMatrix, b: &[Complex64]) -> Vec<Complex64> {
    let n = l.rows();
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l.at(k, i).conj() * x[k];
        }
        x[i] = s / l.at(i, i);
    }
    x
}

/// Solves `B x = rhs` for Hermitian positive-definite `B` via Cholesky.
pub fn solve_hermitian_pd(
    b: &ComplexMatrix,
    rhs: &[Complex64],
) -> Result<Vec<Complex64>, NumericsError> {
    let l = cholesky(b)?;
    Ok(adjoint_back_sub(&l, &forward_sub(&l, rhs)))
}
