//! Eigendecomposition of complex Hermitian matrices via cyclic Jacobi
//! rotations, plus the generalized dominant-eigenvector routines built on it.

use num_complex::Complex64;

use super::matrix::{
    adjoint_back_sub, cholesky, forward_sub, ComplexMatrix, HermitianPsdMatrix, HERMITIAN_REL_TOL,
};
use super::{lex_greater, phase_normalize, vdot, vnormalize, NumericsError, EIG_TIE_GAP};

/// Off-diagonal Frobenius reduction at which the Jacobi sweep stops, relative
/// to the initial off-diagonal Frobenius norm.
const JACOBI_REL_TOL: f64 = 1e-12;
/// Sweep cap; Jacobi converges quadratically, so hitting this indicates a
/// malformed input rather than a hard problem.
const MAX_SWEEPS: usize = 60;

/// Eigenvalues (descending) and matching orthonormal eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Real eigenvalues sorted in descending order.
    pub values: Vec<f64>,
    /// Column `j` is the unit eigenvector for `values[j]`, phase-normalized so
    /// its first entry of magnitude above the phase threshold is real positive.
    pub vectors: ComplexMatrix,
}

impl EigenDecomposition {
    /// Eigenvector for the largest eigenvalue.
    pub fn dominant_vector(&self) -> Vec<Complex64> {
        self.vectors.column(0)
    }
}

fn offdiag_frobenius(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += 2.0 * a.at(i, j).norm_sqr();
        }
    }
    s.sqrt()
}

/// Full eigendecomposition of a conjugate-symmetric matrix.
///
/// # Errors
/// [`NumericsError::NotSquare`] for rectangular input,
/// [`NumericsError::NotHermitian`] when the conjugate asymmetry exceeds the
/// relative tolerance, and [`NumericsError::NonConvergence`] if the sweep cap
/// is reached.
pub fn eig_hermitian(a: &ComplexMatrix) -> Result<EigenDecomposition, NumericsError> {
    if a.rows() != a.cols() {
        return Err(NumericsError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let scale = a.max_abs();
    let asym = a.max_asymmetry();
    if asym > HERMITIAN_REL_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(NumericsError::NotHermitian {
            max_asymmetry: asym,
            tolerance: HERMITIAN_REL_TOL * scale,
        });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(EigenDecomposition {
            values: vec![],
            vectors: ComplexMatrix::zeros(0, 0),
        });
    }

    // Work on an exactly symmetrized copy so rounding in the caller cannot
    // leak into the rotations.
    let mut m = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        m.set(i, i, Complex64::new(a.at(i, i).re, 0.0));
        for j in (i + 1)..n {
            let v = (a.at(i, j) + a.at(j, i).conj()) * 0.5;
            m.set(i, j, v);
            m.set(j, i, v.conj());
        }
    }
    let mut v = ComplexMatrix::identity(n);

    let initial_off = offdiag_frobenius(&m);
    let threshold = JACOBI_REL_TOL * initial_off;

    if initial_off > 0.0 {
        let mut converged = false;
        for _sweep in 0..MAX_SWEEPS {
            if offdiag_frobenius(&m) <= threshold {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m.at(p, q);
                    let mag = apq.norm();
                    if mag == 0.0 {
                        continue;
                    }
                    // Complex rotation zeroing entry (p, q): factor out the
                    // phase of a_pq, then apply the real Jacobi tangent.
                    let u = apq / mag;
                    let tau = (m.at(q, q).re - m.at(p, p).re) / (2.0 * mag);
                    let t = if tau == 0.0 {
                        1.0
                    } else {
                        tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;

                    let app = m.at(p, p).re;
                    let aqq = m.at(q, q).re;

                    for i in 0..n {
                        if i == p || i == q {
                            continue;
                        }
                        let aip = m.at(i, p);
                        let aiq = m.at(i, q);
                        let new_ip = aip * c - aiq * (u.conj() * s);
                        let new_iq = aip * (u * s) + aiq * c;
                        m.set(i, p, new_ip);
                        m.set(p, i, new_ip.conj());
                        m.set(i, q, new_iq);
                        m.set(q, i, new_iq.conj());
                    }
                    let app_new = c * c * app + s * s * aqq - 2.0 * c * s * mag;
                    let aqq_new = c * c * aqq + s * s * app + 2.0 * c * s * mag;
                    m.set(p, p, Complex64::new(app_new, 0.0));
                    m.set(q, q, Complex64::new(aqq_new, 0.0));
                    m.set(p, q, Complex64::new(0.0, 0.0));
                    m.set(q, p, Complex64::new(0.0, 0.0));

                    // Accumulate V <- V J.
                    for i in 0..n {
                        let vip = v.at(i, p);
                        let viq = v.at(i, q);
                        v.set(i, p, vip * c - viq * (u.conj() * s));
                        v.set(i, q, vip * (u * s) + viq * c);
                    }
                }
            }
        }
        if !converged && offdiag_frobenius(&m) > threshold {
            return Err(NumericsError::NonConvergence {
                what: "Jacobi eigendecomposition".into(),
                residual: offdiag_frobenius(&m),
                iterations: MAX_SWEEPS,
            });
        }
    }

    // Sort descending by eigenvalue and phase-normalize each column.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.at(j, j).re.partial_cmp(&m.at(i, i).re).unwrap());
    let mut values = Vec::with_capacity(n);
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(m.at(src, src).re);
        let mut col = v.column(src);
        vnormalize(&mut col);
        phase_normalize(&mut col);
        vectors.set_column(dst, &col);
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Eigenvector for the largest eigenvalue, as a convenience over
/// [`eig_hermitian`].
pub fn dominant_eigenvector(a: &ComplexMatrix) -> Result<Vec<Complex64>, NumericsError> {
    Ok(eig_hermitian(a)?.dominant_vector())
}

/// Unit vector maximizing the generalized Rayleigh quotient
/// `v^H A v / v^H B v` for PSD `A` and strictly positive-definite `B`.
///
/// Computed by the Cholesky reduction `B = L L^H` followed by an ordinary
/// Hermitian eigenproblem on `L^{-1} A L^{-H}`. Ties within [`EIG_TIE_GAP`] of
/// the top generalized eigenvalue are broken deterministically by picking the
/// lexicographically largest phase-normalized candidate, so repeated runs
/// agree bit-for-bit.
///
/// # Errors
/// [`NumericsError::Singular`] naming the offending eigenvalue when `B` is not
/// positive definite (relative floor `1e-12`), plus any error from the inner
/// decompositions.
pub fn generalized_umax(
    a: &HermitianPsdMatrix,
    b: &HermitianPsdMatrix,
) -> Result<Vec<Complex64>, NumericsError> {
    generalized_umax_impl(a, b, None)
}

/// [`generalized_umax`] with a tie preference: when several generalized
/// eigenvectors attain the maximum (within [`EIG_TIE_GAP`]), returns the unit
/// vector in their span closest to `prefer`, falling back to the
/// lexicographic rule when `prefer` is orthogonal to the whole tied span.
pub fn generalized_umax_with_preference(
    a: &HermitianPsdMatrix,
    b: &HermitianPsdMatrix,
    prefer: &[Complex64],
) -> Result<Vec<Complex64>, NumericsError> {
    generalized_umax_impl(a, b, Some(prefer))
}

fn generalized_umax_impl(
    a: &HermitianPsdMatrix,
    b: &HermitianPsdMatrix,
    prefer: Option<&[Complex64]>,
) -> Result<Vec<Complex64>, NumericsError> {
    if a.dim() != b.dim() {
        return Err(NumericsError::DimensionMismatch {
            expected: b.dim(),
            actual: a.dim(),
        });
    }
    let n = b.dim();
    let b_eig = eig_hermitian(b.matrix())?;
    let lam_max = b_eig.values.first().copied().unwrap_or(0.0);
    let lam_min = b_eig.values.last().copied().unwrap_or(0.0);
    if lam_min <= 1e-12 * lam_max.max(f64::MIN_POSITIVE) {
        return Err(NumericsError::Singular {
            eigenvalue: lam_min,
        });
    }

    // Whiten: C = L^{-1} A L^{-H}, where B = L L^H. For an eigenvector u of C,
    // v = L^{-H} u is a generalized eigenvector of (A, B).
    let l = cholesky(b.matrix())?;
    // Y = L^{-1} A, column by column.
    let mut y = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let col = forward_sub(&l, &a.matrix().column(j));
        y.set_column(j, &col);
    }
    // C = Y L^{-H}  <=>  C^H = L^{-1} Y^H.
    let yh = y.adjoint();
    let mut ch = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let col = forward_sub(&l, &yh.column(j));
        ch.set_column(j, &col);
    }
    let c = ch.adjoint();

    let eig = eig_hermitian(&c)?;
    let top = eig.values[0];
    let tied: Vec<usize> = (0..n)
        .filter(|&i| (top - eig.values[i]).abs() <= EIG_TIE_GAP)
        .collect();

    let map_back = |u: &[Complex64]| -> Vec<Complex64> {
        let mut out = adjoint_back_sub(&l, u);
        vnormalize(&mut out);
        phase_normalize(&mut out);
        out
    };

    if tied.len() == 1 {
        return Ok(map_back(&eig.vectors.column(tied[0])));
    }

    if let Some(prefer) = prefer {
        // Orthonormalize the mapped-back tied eigenvectors and project the
        // preferred direction onto their span.
        let mut basis: Vec<Vec<Complex64>> = Vec::new();
        for &i in &tied {
            let mut v = adjoint_back_sub(&l, &eig.vectors.column(i));
            for b in &basis {
                let coeff = vdot(b, &v);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= coeff * bi;
                }
            }
            let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-12 {
                for vi in &mut v {
                    *vi /= norm;
                }
                basis.push(v);
            }
        }
        let mut proj = vec![Complex64::new(0.0, 0.0); n];
        for b in &basis {
            let coeff = vdot(b, prefer);
            for (pi, bi) in proj.iter_mut().zip(b) {
                *pi += coeff * bi;
            }
        }
        let norm = proj.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-9 {
            for p in &mut proj {
                *p /= norm;
            }
            phase_normalize(&mut proj);
            return Ok(proj);
        }
        // Preference orthogonal to the tied span: fall back to the
        // deterministic lexicographic rule.
    }

    let mut best = map_back(&eig.vectors.column(tied[0]));
    for &i in &tied[1..] {
        let cand = map_back(&eig.vectors.column(i));
        if lex_greater(&cand, &best) {
            best = cand;
        }
    }
    Ok(best)
}

/// Orthogonal projector onto the complement of `span(vectors)`, i.e.
/// `I - V (V^H V)^{-1} V^H`. The flag is true when the vectors already span
/// the whole space, in which case the projector is numerically zero and the
/// caller should treat nullspace-constrained designs as infeasible.
pub fn nullspace_projector(
    vectors: &[Vec<Complex64>],
    dim: usize,
) -> Result<(ComplexMatrix, bool), NumericsError> {
    let mut proj = ComplexMatrix::identity(dim);
    // Gram-Schmidt an orthonormal basis of span(vectors), then subtract.
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for v in vectors {
        if v.len() != dim {
            return Err(NumericsError::DimensionMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        let mut w = v.clone();
        for b in &basis {
            let coeff = vdot(b, &w);
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= coeff * bi;
            }
        }
        let norm = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for wi in &mut w {
                *wi /= norm;
            }
            basis.push(w);
        }
    }
    for b in &basis {
        for i in 0..dim {
            for j in 0..dim {
                let v = proj.at(i, j) - b[i] * b[j].conj();
                proj.set(i, j, v);
            }
        }
    }
    let spans_everything = basis.len() >= dim;
    Ok((proj, spans_everything))
}

/// Hermitian PSD square root via eigendecomposition; tiny negative
/// eigenvalues (rounding noise admitted by the PSD tolerance) are clamped to
/// zero before the square root.
pub fn psd_sqrt(r: &HermitianPsdMatrix) -> Result<ComplexMatrix, NumericsError> {
    let eig = eig_hermitian(r.matrix())?;
    let n = r.dim();
    let mut out = ComplexMatrix::zeros(n, n);
    for (idx, &lam) in eig.values.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        if s == 0.0 {
            continue;
        }
        let col = eig.vectors.column(idx);
        for i in 0..n {
            for j in 0..n {
                let v = out.at(i, j) + col[i] * col[j].conj() * Complex64::new(s, 0.0);
                out.set(i, j, v);
            }
        }
    }
    Ok(out)
}
