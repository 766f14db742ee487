//! Dense complex linear algebra for small precoding problems.
//!
//! Everything here operates on matrices of dimension at most a few hundred
//! (antenna count), so the implementations favour determinism and tight
//! control over tie-breaking and normalization conventions rather than raw
//! throughput: a cyclic Jacobi eigensolver for Hermitian matrices, a complex
//! Cholesky reduction for generalized eigenproblems, and a log-barrier
//! interior-point solver for the successive-convex-approximation subproblem.
//!
//! Conventions fixed across the crate:
//! - eigenvalues are returned in descending order with orthonormal vectors;
//! - every returned eigenvector/precoder column is phase-normalized so its
//!   first entry with magnitude above 1e-12 is real and positive;
//! - degenerate eigenvalue ties (gap below 1e-10) are broken by picking the
//!   lexicographically largest phase-normalized vector.

mod eig;
mod matrix;
mod sca;

pub use eig::{
    dominant_eigenvector, eig_hermitian, generalized_umax, generalized_umax_with_preference,
    nullspace_projector, psd_sqrt, EigenDecomposition,
};
pub use matrix::{
    cholesky, solve_hermitian_pd, ComplexMatrix, HermitianPsdMatrix, HERMITIAN_REL_TOL,
    PSD_EIG_REL_TOL,
};
pub use sca::{sca_subproblem, ScaSubproblemSolution};

use num_complex::Complex64;
use thiserror::Error;

/// Eigenvalue gap below which two eigenvalues are treated as tied.
pub const EIG_TIE_GAP: f64 = 1e-10;
/// Magnitude below which a vector entry is ignored for phase normalization.
pub const PHASE_EPS: f64 = 1e-12;

/// Errors produced by the numeric kernels.
#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not Hermitian: max asymmetry {max_asymmetry:.3e} exceeds tolerance {tolerance:.3e}")]
    NotHermitian { max_asymmetry: f64, tolerance: f64 },
    #[error("matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:.3e} at scale {scale:.3e}")]
    NotPositiveSemidefinite { min_eigenvalue: f64, scale: f64 },
    #[error("matrix is singular beyond tolerance: offending eigenvalue {eigenvalue:.3e}")]
    Singular { eigenvalue: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("{what} did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        residual: f64,
        iterations: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

// --- vector helpers ---------------------------------------------------------

/// Inner product `a^H b` (conjugate-linear in the first argument).
pub fn vdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Euclidean norm of a complex vector.
pub fn vnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Returns `a / ||a||`; the zero vector is returned unchanged.
pub fn vnormalize(a: &[Complex64]) -> Vec<Complex64> {
    let n = vnorm(a);
    if n == 0.0 {
        return a.to_vec();
    }
    a.iter().map(|x| x / n).collect()
}

/// Rotates a global phase so the first entry with magnitude above
/// [`PHASE_EPS`] becomes real and positive. All-negligible vectors are
/// returned unchanged.
pub fn phase_normalize(v: &[Complex64]) -> Vec<Complex64> {
    match v.iter().find(|x| x.norm() > PHASE_EPS) {
        Some(pivot) => {
            let rot = pivot.conj() / pivot.norm();
            v.iter().map(|x| x * rot).collect()
        }
        None => v.to_vec(),
    }
}

/// Cosine of the principal angle between the lines spanned by `a` and `b`:
/// `|a^H b| / (||a|| ||b||)`. Equals 1 for colinear vectors.
pub fn colinearity(a: &[Complex64], b: &[Complex64]) -> f64 {
    let na = vnorm(a);
    let nb = vnorm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    vdot(a, b).norm() / (na * nb)
}

/// Lexicographic comparison of phase-normalized vectors, ordering by
/// `(re, im)` entrywise. Used as the deterministic tie-break for degenerate
/// eigenvalue groups.
pub(crate) fn lex_greater(a: &[Complex64], b: &[Complex64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x.re != y.re {
            return x.re > y.re;
        }
        if x.im != y.im {
            return x.im > y.im;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vdot_conjugates_first_argument() {
        let a = vec![Complex64::new(0.0, 1.0)];
        let b = vec![Complex64::new(0.0, 1.0)];
        assert_eq!(vdot(&a, &b), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn phase_normalize_makes_leading_entry_real_positive() {
        let v = vec![Complex64::new(0.0, -2.0), Complex64::new(1.0, 1.0)];
        let p = phase_normalize(&v);
        assert!((p[0].re - 2.0).abs() < 1e-15);
        assert!(p[0].im.abs() < 1e-15);
        // norm preserved
        assert!((vnorm(&p) - vnorm(&v)).abs() < 1e-12);
    }

    #[test]
    fn phase_normalize_skips_negligible_leading_entries() {
        let v = vec![Complex64::new(1e-15, 0.0), Complex64::new(0.0, 3.0)];
        let p = phase_normalize(&v);
        assert!((p[1].re - 3.0).abs() < 1e-12);
        assert!(p[1].im.abs() < 1e-12);
    }

    #[test]
    fn colinearity_is_one_for_phase_rotated_copies() {
        let a = vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.25)];
        let rot = Complex64::from_polar(1.0, 1.234);
        let b: Vec<Complex64> = a.iter().map(|x| x * rot).collect();
        assert!((colinearity(&a, &b) - 1.0).abs() < 1e-12);
    }
}
