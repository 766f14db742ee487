//! Interior-point solver for the linearized max-min common-precoder
//! subproblem:
//!
//! maximize t   subject to   2·Re{z^H R_k x} − z^H R_k z ≥ β_k t  (k = 1..K)
//!                           x^H M x ≤ 1.
//!
//! The quadratic constraint and the K linear constraints are handled by a
//! log barrier over the real-imaginary split of `x` plus the scalar `t`,
//! with Newton steps on the barrier objective and a geometric barrier
//! schedule. Problem dimension is 2K+1 in practice, so a dense self-contained
//! solver is appropriate.

use num_complex::Complex64;

use super::matrix::HermitianPsdMatrix;
use super::{vdot, NumericsError};

/// Initial barrier parameter.
const MU_START: f64 = 1.0;
/// Barrier reduction per outer step.
const MU_FACTOR: f64 = 0.2;
/// Outer stop: (number of constraints) × μ below this duality-gap surrogate.
const GAP_TOL: f64 = 1e-8;
/// Newton stop: half squared Newton decrement below this.
const NEWTON_TOL: f64 = 1e-9;
/// Armijo slope fraction for the backtracking line search.
const ARMIJO: f64 = 0.25;
/// Step-size floor below which the line search gives up.
const MIN_STEP: f64 = 1e-12;
/// Newton iterations allowed per barrier value.
const MAX_NEWTON_STEPS: usize = 50;
/// Stationarity-residual bound the solver must meet to report success.
const KKT_TOL: f64 = 1e-7;

/// Result of one linearized subproblem solve.
#[derive(Debug, Clone)]
pub struct ScaSubproblemSolution {
    /// New precoder direction; always satisfies `x^H M x ≤ 1 + 1e-9`.
    pub x: Vec<Complex64>,
    /// Worst-case linearized objective `min_k (2·Re{z^H R_k x} − z^H R_k z)/β_k`
    /// attained by `x`.
    pub t: f64,
    /// Euclidean norm of the barrier stationarity residual at the final
    /// interior-point iterate.
    pub kkt_residual: f64,
    /// True when the expansion point `z` scored at least as well as the
    /// interior-point iterate and was returned instead. Guarantees the
    /// objective never degrades at the expansion point.
    pub kept_previous: bool,
}

/// Solves the linearized subproblem around the expansion point `z`.
///
/// # Errors
/// [`NumericsError::InvalidArgument`] on shape mismatches, non-positive `beta`
/// entries, or infeasible `z` (`z^H M z > 1 + 1e-9`);
/// [`NumericsError::NonConvergence`] with the residual when the interior-point
/// iteration fails to reach the [`KKT_TOL`] stationarity target.
pub fn sca_subproblem(
    z: &[Complex64],
    r_list: &[HermitianPsdMatrix],
    beta: &[f64],
    m_gram: &HermitianPsdMatrix,
) -> Result<ScaSubproblemSolution, NumericsError> {
    let n = z.len();
    let k_users = r_list.len();
    if k_users == 0 {
        return Err(NumericsError::InvalidArgument(
            "subproblem needs at least one constraint matrix".into(),
        ));
    }
    if beta.len() != k_users {
        return Err(NumericsError::DimensionMismatch {
            expected: k_users,
            actual: beta.len(),
        });
    }
    if m_gram.dim() != n {
        return Err(NumericsError::DimensionMismatch {
            expected: n,
            actual: m_gram.dim(),
        });
    }
    for r in r_list {
        if r.dim() != n {
            return Err(NumericsError::DimensionMismatch {
                expected: n,
                actual: r.dim(),
            });
        }
    }
    if let Some(&b) = beta.iter().find(|&&b| !(b > 0.0)) {
        return Err(NumericsError::InvalidArgument(format!(
            "beta entries must be positive, got {b}"
        )));
    }
    let z_power = m_gram.quad_form(z);
    if z_power > 1.0 + 1e-9 {
        return Err(NumericsError::InvalidArgument(format!(
            "expansion point violates the power constraint: z^H M z = {z_power}"
        )));
    }

    // Fold beta into the constraint matrices (divide row k by beta_k) and
    // rescale everything to unit magnitude so barrier tolerances are
    // scale-free. The reported t is mapped back at the end.
    let weighted: Vec<&HermitianPsdMatrix> = r_list.iter().collect();
    let scale = weighted
        .iter()
        .zip(beta)
        .map(|(r, &b)| r.matrix().max_abs() / b)
        .fold(0.0_f64, f64::max);
    if scale <= f64::MIN_POSITIVE {
        // All constraint matrices are zero: t* = 0 at any feasible point.
        return Ok(ScaSubproblemSolution {
            x: z.to_vec(),
            t: 0.0,
            kkt_residual: 0.0,
            kept_previous: true,
        });
    }

    // a_k = R_k z / (beta_k · scale); c_k = z^H R_k z / (beta_k · scale).
    let mut a: Vec<Vec<Complex64>> = Vec::with_capacity(k_users);
    let mut c: Vec<f64> = Vec::with_capacity(k_users);
    for (r, &b) in r_list.iter().zip(beta) {
        let mut rz = r.matrix().matvec(z);
        let w = 1.0 / (b * scale);
        for v in &mut rz {
            *v *= w;
        }
        c.push(vdot(z, &rz).re);
        a.push(rz);
    }

    // Real embedding: y = (xt, t) with xt = [Re x; Im x] of length 2n.
    let dim = 2 * n + 1;
    let mt = real_embedding(m_gram);
    let at: Vec<Vec<f64>> = a
        .iter()
        .map(|ak| {
            let mut v = Vec::with_capacity(2 * n);
            v.extend(ak.iter().map(|x| x.re));
            v.extend(ak.iter().map(|x| x.im));
            v
        })
        .collect();
    let mut zt = Vec::with_capacity(2 * n);
    zt.extend(z.iter().map(|x| x.re));
    zt.extend(z.iter().map(|x| x.im));

    // Strictly feasible start: pull z slightly inside the ellipsoid, then
    // drop t far enough below the active linear constraints.
    let shrink = 0.999 / z_power.sqrt().max(1.0);
    let mut xt: Vec<f64> = zt.iter().map(|&v| v * shrink).collect();
    let margins: Vec<f64> = at
        .iter()
        .zip(&c)
        .map(|(ak, &ck)| 2.0 * dot(ak, &xt) - ck)
        .collect();
    let worst = margins.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut t = worst - 0.5 * worst.abs().max(1.0);

    let constraints = (k_users + 1) as f64;
    let mut mu = MU_START;
    loop {
        newton_minimize(&mut xt, &mut t, mu, &at, &c, &mt, n)?;
        if constraints * mu < GAP_TOL {
            break;
        }
        mu *= MU_FACTOR;
    }
    // Certify the iterate: best-fit nonnegative multipliers for the KKT
    // stationarity system, with the final duality-gap surrogate folded in.
    let stationarity = kkt_stationarity_residual(&xt, &at, &mt, dim);
    let kkt_residual = stationarity.max(constraints * mu);

    if kkt_residual > KKT_TOL {
        return Err(NumericsError::NonConvergence {
            what: "interior-point subproblem".into(),
            residual: kkt_residual,
            iterations: MAX_NEWTON_STEPS,
        });
    }

    // Reassemble the complex iterate and apply the expansion-point safeguard:
    // the linearized objective at z itself is min_k c_k, and the solver must
    // never return anything worse.
    let x_ip: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(xt[i], xt[n + i]))
        .collect();
    let t_ip = at
        .iter()
        .zip(&c)
        .map(|(ak, &ck)| 2.0 * dot(ak, &xt) - ck)
        .fold(f64::INFINITY, f64::min);
    let t_z = c.iter().cloned().fold(f64::INFINITY, f64::min);
    if t_z >= t_ip {
        Ok(ScaSubproblemSolution {
            x: z.to_vec(),
            t: t_z * scale,
            kkt_residual,
            kept_previous: true,
        })
    } else {
        Ok(ScaSubproblemSolution {
            x: x_ip,
            t: t_ip * scale,
            kkt_residual,
            kept_previous: false,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stationarity residual of the max-min problem at the final iterate:
/// minimize ‖Σ λ_k ∇g_k + ν ∇q + e_t‖ over λ, ν ≥ 0, where
/// ∇g_k = (2 a_k, −1) and ∇q = (−2 Mt x, 0). The nonnegative fit uses an
/// active-set loop: solve on the passive set, drop the most negative
/// multiplier, refit — a plain clamp would corrupt exact fits when the
/// gradient system is singular.
fn kkt_stationarity_residual(xt: &[f64], at: &[Vec<f64>], mt: &[f64], dim: usize) -> f64 {
    let d = dim - 1;
    let k_users = at.len();
    let cols = k_users + 1;
    let mx = symv(mt, xt);
    // Column j of the constraint-gradient matrix.
    let col = |j: usize, i: usize| -> f64 {
        if j < k_users {
            if i < d {
                2.0 * at[j][i]
            } else {
                -1.0
            }
        } else if i < d {
            -2.0 * mx[i]
        } else {
            0.0
        }
    };
    // Target: Σ λ_k ∇g_k + ν ∇q = −e_t.
    let b = |i: usize| -> f64 {
        if i < d {
            0.0
        } else {
            -1.0
        }
    };
    let mut theta = vec![0.0; cols];
    let mut passive: Vec<usize> = (0..cols).collect();
    while !passive.is_empty() {
        let p = passive.len();
        let mut gram = vec![0.0; p * p];
        let mut rhs = vec![0.0; p];
        for (s, &js) in passive.iter().enumerate() {
            for (r, &jr) in passive.iter().enumerate().skip(s) {
                let v: f64 = (0..dim).map(|i| col(js, i) * col(jr, i)).sum();
                gram[s * p + r] = v;
                gram[r * p + s] = v;
            }
            rhs[s] = (0..dim).map(|i| col(js, i) * b(i)).sum();
        }
        let sol = match solve_spd_with_jitter(&mut gram, p, &rhs) {
            Some(t) => t,
            None => return f64::INFINITY,
        };
        let worst = sol
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v < 0.0)
            .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite multipliers"));
        match worst {
            Some((slot, _)) => {
                passive.remove(slot);
            }
            None => {
                for (slot, &j) in passive.iter().enumerate() {
                    theta[j] = sol[slot];
                }
                break;
            }
        }
    }
    let mut res = 0.0;
    for i in 0..dim {
        let fit: f64 = (0..cols).map(|j| theta[j] * col(j, i)).sum();
        res += (fit - b(i)) * (fit - b(i));
    }
    res.sqrt()
}

/// Real 2n×2n embedding [[Re M, −Im M], [Im M, Re M]] of a Hermitian matrix,
/// such that x^H M x = xt' Mt xt for xt = [Re x; Im x].
fn real_embedding(m: &HermitianPsdMatrix) -> Vec<f64> {
    let n = m.dim();
    let d = 2 * n;
    let mut out = vec![0.0; d * d];
    for i in 0..n {
        for j in 0..n {
            let v = m.matrix().at(i, j);
            out[i * d + j] = v.re;
            out[i * d + (n + j)] = -v.im;
            out[(n + i) * d + j] = v.im;
            out[(n + i) * d + (n + j)] = v.re;
        }
    }
    out
}

fn symv(m: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d)
        .map(|i| (0..d).map(|j| m[i * d + j] * x[j]).sum())
        .collect()
}

fn quad(m: &[f64], x: &[f64]) -> f64 {
    dot(&symv(m, x), x)
}

/// Barrier objective −t − μ(Σ ln g_k + ln q); +∞ outside the domain.
fn barrier_value(
    xt: &[f64],
    t: f64,
    mu: f64,
    at: &[Vec<f64>],
    c: &[f64],
    mt: &[f64],
) -> f64 {
    let mut val = -t;
    for (ak, &ck) in at.iter().zip(c) {
        let g = 2.0 * dot(ak, xt) - ck - t;
        if g <= 0.0 {
            return f64::INFINITY;
        }
        val -= mu * g.ln();
    }
    let q = 1.0 - quad(mt, xt);
    if q <= 0.0 {
        return f64::INFINITY;
    }
    val - mu * q.ln()
}

#[allow(clippy::too_many_arguments)]
fn barrier_gradient(
    grad: &mut [f64],
    xt: &[f64],
    t: f64,
    mu: f64,
    at: &[Vec<f64>],
    c: &[f64],
    mt: &[f64],
    n: usize,
) {
    let d = 2 * n;
    for g in grad.iter_mut() {
        *g = 0.0;
    }
    grad[d] = -1.0;
    for (ak, &ck) in at.iter().zip(c) {
        let g = 2.0 * dot(ak, xt) - ck - t;
        let w = mu / g;
        for i in 0..d {
            grad[i] -= w * 2.0 * ak[i];
        }
        grad[d] += w;
    }
    let mx = symv(mt, xt);
    let q = 1.0 - dot(&mx, xt);
    let w = mu / q;
    for i in 0..d {
        grad[i] += w * 2.0 * mx[i];
    }
}

/// Newton descent on the barrier objective at fixed μ; updates (xt, t) in
/// place.
fn newton_minimize(
    xt: &mut Vec<f64>,
    t: &mut f64,
    mu: f64,
    at: &[Vec<f64>],
    c: &[f64],
    mt: &[f64],
    n: usize,
) -> Result<(), NumericsError> {
    let d = 2 * n;
    let dim = d + 1;
    let mut grad = vec![0.0; dim];
    let mut hess = vec![0.0; dim * dim];

    for _step in 0..MAX_NEWTON_STEPS {
        barrier_gradient(&mut grad, xt, *t, mu, at, c, mt, n);

        // Hessian: Σ (μ/g²) ∇g ∇gᵀ + (μ/q²) ∇q ∇qᵀ + (2μ/q) Mt (x-block).
        for h in hess.iter_mut() {
            *h = 0.0;
        }
        for (ak, &ck) in at.iter().zip(c) {
            let g = 2.0 * dot(ak, xt) - ck - *t;
            let w = mu / (g * g);
            // ∇g = (2 ak, −1)
            for i in 0..d {
                for j in 0..d {
                    hess[i * dim + j] += w * 4.0 * ak[i] * ak[j];
                }
                hess[i * dim + d] -= w * 2.0 * ak[i];
                hess[d * dim + i] -= w * 2.0 * ak[i];
            }
            hess[d * dim + d] += w;
        }
        let mx = symv(mt, xt);
        let q = 1.0 - dot(&mx, xt);
        let wq = mu / (q * q);
        let wl = 2.0 * mu / q;
        for i in 0..d {
            for j in 0..d {
                hess[i * dim + j] += wq * 4.0 * mx[i] * mx[j] + wl * mt[i * d + j];
            }
        }

        let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
        let dir = solve_spd_with_jitter(&mut hess, dim, &neg_grad).ok_or_else(|| {
            NumericsError::NonConvergence {
                what: "interior-point Newton system".into(),
                residual: dot(&grad, &grad).sqrt(),
                iterations: MAX_NEWTON_STEPS,
            }
        })?;

        let slope = dot(&grad, &dir); // = −decrement²
        if -slope / 2.0 <= NEWTON_TOL {
            return Ok(());
        }

        // Backtracking: strict feasibility plus Armijo decrease.
        let f0 = barrier_value(xt, *t, mu, at, c, mt);
        let mut alpha = 1.0;
        loop {
            let cand_x: Vec<f64> = xt
                .iter()
                .zip(&dir[..d])
                .map(|(&x, &dx)| x + alpha * dx)
                .collect();
            let cand_t = *t + alpha * dir[d];
            let f1 = barrier_value(&cand_x, cand_t, mu, at, c, mt);
            if f1 <= f0 + ARMIJO * alpha * slope {
                *xt = cand_x;
                *t = cand_t;
                break;
            }
            alpha *= 0.5;
            if alpha < MIN_STEP {
                // No acceptable step: the iterate is as converged as the
                // arithmetic allows at this barrier value.
                return Ok(());
            }
        }
    }
    Ok(())
}

/// Dense SPD solve with escalating diagonal jitter on factorization failure.
fn solve_spd_with_jitter(h: &mut [f64], dim: usize, rhs: &[f64]) -> Option<Vec<f64>> {
    let trace: f64 = (0..dim).map(|i| h[i * dim + i]).sum();
    let mut jitter = 1e-12 * trace.abs().max(1.0) / dim as f64;
    for attempt in 0..6 {
        if attempt > 0 {
            for i in 0..dim {
                h[i * dim + i] += jitter;
            }
            jitter *= 10.0;
        }
        if let Some(x) = solve_spd_real(h, dim, rhs) {
            return Some(x);
        }
    }
    None
}

/// Real symmetric positive-definite solve via in-place Cholesky.
fn solve_spd_real(h: &[f64], dim: usize, rhs: &[f64]) -> Option<Vec<f64>> {
    let mut l = h.to_vec();
    for j in 0..dim {
        let mut dvalue = l[j * dim + j];
        for k in 0..j {
            dvalue -= l[j * dim + k] * l[j * dim + k];
        }
        if dvalue <= 0.0 || !dvalue.is_finite() {
            return None;
        }
        let s = dvalue.sqrt();
        l[j * dim + j] = s;
        for i in (j + 1)..dim {
            let mut v = l[i * dim + j];
            for k in 0..j {
                v -= l[i * dim + k] * l[j * dim + k];
            }
            l[i * dim + j] = v / s;
        }
    }
    let mut y = rhs.to_vec();
    for i in 0..dim {
        for k in 0..i {
            y[i] -= l[i * dim + k] * y[k];
        }
        y[i] /= l[i * dim + i];
    }
    for i in (0..dim).rev() {
        for k in (i + 1)..dim {
            y[i] -= l[k * dim + i] * y[k];
        }
        y[i] /= l[i * dim + i];
    }
    Some(y)
}
