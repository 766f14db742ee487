//! Rate splitting on top of the hybrid precoder: power splitting between a
//! common and private messages, the successive-convex-approximation design
//! of the common precoder, the ergodic lower bound, and instantaneous RS
//! rates.
//!
//! The transmit signal superimposes one common stream (decoded first by
//! every user, then cancelled) on the K private streams. The split
//! `t ∈ (0, 1]` assigns `P·t/K` to each private stream and `P(1−t)` to the
//! common stream; `t = 1` degenerates to plain transmission.

use num_complex::Complex64;
use thiserror::Error;

use crate::numerics::{
    dominant_eigenvector, sca_subproblem, vdot, ComplexMatrix, HermitianPsdMatrix, NumericsError,
};
use crate::precoding::{effective_channel, AnalogBeamformer};
use crate::rates::private_rates;

/// Euler–Mascheroni constant; `e^{−γ} ≈ 0.5615` discounts the ergodic
/// bound's per-term SNR.
pub const EULER_GAMMA: f64 = 0.5772156649015329;

/// Leakage levels below this count as no inter-user interference, in which
/// case all power goes private.
const NO_INTERFERENCE_TOL: f64 = 1e-12;
/// Outer-loop relative tolerance on the common-precoder objective.
const SCA_REL_TOL: f64 = 1e-7;
/// Outer-loop iteration cap; hitting it sets the trace's `capped` flag.
const SCA_MAX_ITERS: usize = 100;

#[derive(Debug, Error)]
pub enum RateSplittingError {
    #[error("total power must be positive and finite, got {0}")]
    InvalidPower(f64),
    #[error("split ratio must lie in (0, 1], got {0}")]
    InvalidSplit(f64),
    #[error("noise floor must be positive and finite, got {0}")]
    InvalidNoiseFloor(f64),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

// --- Power split ---------------------------------------------------------------------

/// Division of the power budget between the common stream and the K private
/// streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    t: f64,
    total_power: f64,
    users: usize,
    common_power: f64,
    private_power: f64,
}

impl PowerSplit {
    /// Builds a split with ratio `t ∈ (0, 1]` of power `P` over `users`
    /// private streams.
    pub fn new(total_power: f64, users: usize, t: f64) -> Result<Self, RateSplittingError> {
        if !(total_power > 0.0) || !total_power.is_finite() {
            return Err(RateSplittingError::InvalidPower(total_power));
        }
        if users == 0 {
            return Err(RateSplittingError::DimensionMismatch {
                expected: 1,
                actual: 0,
            });
        }
        if !(t > 0.0 && t <= 1.0) {
            return Err(RateSplittingError::InvalidSplit(t));
        }
        Ok(Self {
            t,
            total_power,
            users,
            common_power: total_power * (1.0 - t),
            private_power: total_power * t / users as f64,
        })
    }

    /// Fraction of power spent on private streams.
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn total_power(&self) -> f64 {
        self.total_power
    }

    pub fn users(&self) -> usize {
        self.users
    }

    /// Common-stream power `P(1−t)`.
    pub fn common_power(&self) -> f64 {
        self.common_power
    }

    /// Per-private-stream power `P·t/K`.
    pub fn private_power(&self) -> f64 {
        self.private_power
    }

    /// Whether the split degenerates to plain transmission.
    pub fn is_degenerate(&self) -> bool {
        self.t >= 1.0
    }
}

/// Closed-form split: the worst user's average inter-user leakage
/// `Γ = min_k (1/K) Σ_{j≠k} w_j^H R_{k,eff} w_j` sets `t = min{K/(PΓ), 1}`.
/// Leakage at or below 1e-12 counts as interference-free and forces `t = 1`.
pub fn power_split(
    total_power: f64,
    r_eff: &[HermitianPsdMatrix],
    w: &ComplexMatrix,
) -> Result<PowerSplit, RateSplittingError> {
    if !(total_power > 0.0) || !total_power.is_finite() {
        return Err(RateSplittingError::InvalidPower(total_power));
    }
    let users = r_eff.len();
    if users == 0 || w.cols() != users {
        return Err(RateSplittingError::DimensionMismatch {
            expected: users.max(1),
            actual: w.cols(),
        });
    }
    let mut gamma = f64::INFINITY;
    for (k, r) in r_eff.iter().enumerate() {
        let mut leakage = 0.0;
        for j in 0..users {
            if j != k {
                leakage += r.quad_form(&w.column(j));
            }
        }
        gamma = gamma.min(leakage / users as f64);
    }
    let t = if gamma <= NO_INTERFERENCE_TOL {
        1.0
    } else {
        (users as f64 / (total_power * gamma)).min(1.0)
    };
    PowerSplit::new(total_power, users, t)
}

/// Per-user noise-plus-private-interference floors for the common stream:
/// `β_k = 1 + (Pt/K) Σ_j w_j^H R_{k,eff} w_j` (all private streams count —
/// the common message is decoded before any of them are cancelled).
pub fn common_noise_floors(
    split: &PowerSplit,
    r_eff: &[HermitianPsdMatrix],
    w: &ComplexMatrix,
) -> Result<Vec<f64>, RateSplittingError> {
    if r_eff.len() != split.users() || w.cols() != split.users() {
        return Err(RateSplittingError::DimensionMismatch {
            expected: split.users(),
            actual: r_eff.len().min(w.cols()),
        });
    }
    Ok(r_eff
        .iter()
        .map(|r| {
            let total: f64 = (0..w.cols()).map(|j| r.quad_form(&w.column(j))).sum();
            1.0 + split.private_power() * total
        })
        .collect())
}

// --- Common precoder (SCA) -------------------------------------------------------------

/// One outer iteration of the common-precoder optimization.
#[derive(Debug, Clone)]
pub struct ScaIteration {
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterate: Vec<Complex64>,
}

/// Convergence record of [`sca_common_precoder`]; the objective column is
/// non-decreasing within 1e-9.
#[derive(Debug, Clone, Default)]
pub struct ScaTrace {
    pub iterations: Vec<ScaIteration>,
    /// Set when the outer loop hit its iteration cap before converging.
    pub capped: bool,
}

impl ScaTrace {
    /// Exports `iteration,objective,kkt_residual` rows for convergence
    /// plots.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,objective,kkt_residual\n");
        for (i, it) in self.iterations.iter().enumerate() {
            out.push_str(&format!("{},{:.6e},{:.6e}\n", i, it.objective, it.kkt_residual));
        }
        out
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.iterations.last().map(|it| it.objective)
    }
}

/// Designs the common precoder by successive convex approximation of
/// `max_x min_k (x^H R_{k,eff} x)/β_k` subject to `x^H Mgram x ≤ 1`.
///
/// Starts from the power-normalized dominant eigenvector of
/// `Σ_k R_{k,eff}/β_k`, solves the linearized inner problem repeatedly, and
/// stops once the objective moves by less than `1e-7·max(1, |t|)` or after
/// 100 iterations (then the best iterate is returned and the trace is
/// flagged as capped). The returned vector sits on the power boundary:
/// `x^H Mgram x = 1` within 1e-6.
pub fn sca_common_precoder(
    r_eff: &[HermitianPsdMatrix],
    beta: &[f64],
    m_gram: &HermitianPsdMatrix,
) -> Result<(Vec<Complex64>, ScaTrace), RateSplittingError> {
    let users = r_eff.len();
    if users == 0 || beta.len() != users {
        return Err(RateSplittingError::DimensionMismatch {
            expected: users.max(1),
            actual: beta.len(),
        });
    }
    for &b in beta {
        if !(b > 0.0) || !b.is_finite() {
            return Err(RateSplittingError::InvalidNoiseFloor(b));
        }
    }
    let dim = m_gram.dim();
    for r in r_eff {
        if r.dim() != dim {
            return Err(RateSplittingError::DimensionMismatch {
                expected: dim,
                actual: r.dim(),
            });
        }
    }

    // start from the direction that is best on average across users
    let mut weighted = ComplexMatrix::zeros(dim, dim);
    for (r, &b) in r_eff.iter().zip(beta) {
        weighted = weighted.add(&r.matrix().scaled(Complex64::new(1.0 / b, 0.0)));
    }
    let v = dominant_eigenvector(&weighted)?;
    let scale = m_gram.quad_form(&v).sqrt();
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(RateSplittingError::Numerics(NumericsError::Singular {
            eigenvalue: scale * scale,
        }));
    }
    let mut z: Vec<Complex64> = v.iter().map(|x| x / scale).collect();

    let mut trace = ScaTrace::default();
    let mut prev_t: Option<f64> = None;
    trace.capped = true;
    for _ in 0..SCA_MAX_ITERS {
        let sol = sca_subproblem(&z, r_eff, beta, m_gram)?;
        z = sol.x;
        trace.iterations.push(ScaIteration {
            objective: sol.t,
            kkt_residual: sol.kkt_residual,
            iterate: z.clone(),
        });
        if let Some(p) = prev_t {
            if (sol.t - p).abs() <= SCA_REL_TOL * p.abs().max(1.0) {
                trace.capped = false;
                break;
            }
        }
        prev_t = Some(sol.t);
    }

    // the constraint is tight at an optimum: rescale onto the boundary
    let power = m_gram.quad_form(&z).sqrt();
    if !(power > 0.0) || !power.is_finite() {
        return Err(RateSplittingError::Numerics(NumericsError::Singular {
            eigenvalue: power * power,
        }));
    }
    let w_c: Vec<Complex64> = z.iter().map(|x| x / power).collect();
    Ok((w_c, trace))
}

// --- Ergodic lower bound ------------------------------------------------------------------

/// Ergodic RS sum-rate lower bound: worst-user common term plus per-user
/// private terms, each discounted by `e^{−γ}`:
///
/// `min_k log2(1 + e^{−γ} P(1−t) w_c^H R_k w_c / β_k)
///  + Σ_k log2(1 + e^{−γ} (Pt/K) w_k^H R_k w_k / (1 + (Pt/K) Σ_{j≠k} w_j^H R_k w_j))`.
pub fn rs_lower_bound(
    split: &PowerSplit,
    w_c: &[Complex64],
    w: &ComplexMatrix,
    r_eff: &[HermitianPsdMatrix],
) -> Result<f64, RateSplittingError> {
    let users = split.users();
    if r_eff.len() != users || w.cols() != users {
        return Err(RateSplittingError::DimensionMismatch {
            expected: users,
            actual: r_eff.len().min(w.cols()),
        });
    }
    let discount = (-EULER_GAMMA).exp();
    let p_priv = split.private_power();
    let mut common_bound = f64::INFINITY;
    let mut private_sum = 0.0;
    for (k, r) in r_eff.iter().enumerate() {
        let mut own = 0.0;
        let mut cross = 0.0;
        for j in 0..users {
            let q = r.quad_form(&w.column(j));
            if j == k {
                own = q;
            } else {
                cross += q;
            }
        }
        let beta = 1.0 + p_priv * (own + cross);
        let common_term =
            (1.0 + discount * split.common_power() * r.quad_form(w_c) / beta).log2();
        common_bound = common_bound.min(common_term);
        private_sum += (1.0 + discount * p_priv * own / (1.0 + p_priv * cross)).log2();
    }
    if split.is_degenerate() {
        common_bound = 0.0;
    }
    Ok(common_bound + private_sum)
}

// --- Instantaneous rates --------------------------------------------------------------------

/// Instantaneous RS rates for one channel realization.
#[derive(Debug, Clone)]
pub struct RsRates {
    /// Common-stream rate, limited by the worst user (all must decode it).
    pub common: f64,
    /// Per-user private rates after common-stream cancellation.
    pub private: Vec<f64>,
}

impl RsRates {
    pub fn sum(&self) -> f64 {
        self.common + self.private.iter().sum::<f64>()
    }
}

/// Evaluates the common and private rates on actual channels. The common
/// SINR at user `k` is `P_c |h_k^H F w_c|² / (1 + Σ_j P_j |h_k^H F w_j|²)`
/// (decoded before any private stream); the private rates reuse the plain
/// path's arithmetic, so a degenerate split matches it bit for bit.
pub fn rs_instantaneous_rates(
    h: &[Vec<Complex64>],
    f: &AnalogBeamformer,
    w_c: &[Complex64],
    w: &ComplexMatrix,
    split: &PowerSplit,
) -> Result<RsRates, RateSplittingError> {
    let users = split.users();
    if h.len() != users || w.cols() != users {
        return Err(RateSplittingError::DimensionMismatch {
            expected: users,
            actual: h.len().min(w.cols()),
        });
    }
    let h_eff: Vec<Vec<Complex64>> = h.iter().map(|hk| effective_channel(f, hk)).collect();
    let mut common = f64::INFINITY;
    for h in &h_eff {
        let mut private_load = 0.0;
        for j in 0..users {
            private_load += vdot(h, &w.column(j)).norm_sqr();
        }
        let num = split.common_power() * vdot(h, w_c).norm_sqr();
        let sinr = num / (1.0 + split.private_power() * private_load);
        common = common.min((1.0 + sinr).log2());
    }
    if split.is_degenerate() {
        common = 0.0;
    }
    let private = private_rates(&h_eff, w, split.private_power());
    Ok(RsRates { common, private })
}
