//! Analog beam selection and the four digital precoder designs, combined
//! into a normalized hybrid precoder.
//!
//! The analog stage picks one constant-modulus codeword per user by
//! exhaustive search over the RF codebook (selection scores use `|h^H f|²`,
//! so it is invariant to a global phase rotation of the channel). The
//! digital stage then shapes the K-dimensional effective space with one of:
//! statistical nullspace beamforming, the statistical SLNR generalized
//! eigenvector design, zero forcing on quantized effective channels, or the
//! closed-form quantized SLNR design. Every digital column is normalized so
//! the cascaded column satisfies `‖F w_k‖ = 1`.

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::ChannelRealization;
use crate::codebook::RfCodebook;
use crate::numerics::{
    dominant_eigenvector, eig_hermitian, generalized_umax_with_preference, nullspace_projector,
    solve_hermitian_pd, vdot, ComplexMatrix, HermitianPsdMatrix, NumericsError,
};

/// Relative eigenvalue threshold below which the analog gram is reported as
/// rank deficient.
const RANK_REL_TOL: f64 = 1e-10;
/// Condition-number ceiling for the quantized channel matrix in zero
/// forcing.
const ZF_MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Error)]
pub enum PrecodingError {
    #[error("no users in the channel realization")]
    NoUsers,
    #[error("RF codebook is empty")]
    EmptyCodebook,
    #[error("RF codebook has {available} codewords but {needed} users need distinct beams")]
    CodebookExhausted { needed: usize, available: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("analog beamformer entry at ({row}, {col}) is not constant modulus")]
    NotConstantModulus { row: usize, col: usize },
    #[error("nullspace beamforming infeasible for user {user}: interference spans the space")]
    SbfInfeasible { user: usize },
    #[error("quantized channel matrix is rank deficient (smallest singular value {smallest_singular_value:.3e})")]
    RankDeficientChannel { smallest_singular_value: f64 },
    #[error("digital column {user} has zero power through the analog stage")]
    ZeroColumn { user: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

// --- Analog stage ------------------------------------------------------------------

/// Constant-modulus analog beamformer: one RF codeword per user.
#[derive(Debug, Clone)]
pub struct AnalogBeamformer {
    f: ComplexMatrix,
    gram: HermitianPsdMatrix,
    selected: Vec<usize>,
    duplicates_resolved: usize,
    rank_deficient: bool,
}

impl AnalogBeamformer {
    /// Builds the beamformer from explicit codeword columns; `selected`
    /// records where each column came from. Every entry must have magnitude
    /// `1/√M` within 1e-12.
    pub fn from_columns(
        columns: &[Vec<Complex64>],
        selected: Vec<usize>,
    ) -> Result<Self, PrecodingError> {
        if columns.is_empty() {
            return Err(PrecodingError::NoUsers);
        }
        if selected.len() != columns.len() {
            return Err(PrecodingError::DimensionMismatch {
                expected: columns.len(),
                actual: selected.len(),
            });
        }
        let m = columns[0].len();
        let modulus = 1.0 / (m as f64).sqrt();
        for (col, column) in columns.iter().enumerate() {
            if column.len() != m {
                return Err(PrecodingError::DimensionMismatch {
                    expected: m,
                    actual: column.len(),
                });
            }
            for (row, v) in column.iter().enumerate() {
                if (v.norm() - modulus).abs() > 1e-12 {
                    return Err(PrecodingError::NotConstantModulus { row, col });
                }
            }
        }
        let f = ComplexMatrix::from_columns(columns)?;
        let gram = HermitianPsdMatrix::from_gram(&f.adjoint());
        let eig = eig_hermitian(gram.matrix())?;
        let rank_deficient = eig.values[eig.values.len() - 1] <= RANK_REL_TOL * eig.values[0];
        Ok(Self {
            f,
            gram,
            selected,
            duplicates_resolved: 0,
            rank_deficient,
        })
    }

    /// The M×K matrix F.
    pub fn matrix(&self) -> &ComplexMatrix {
        &self.f
    }

    /// The K×K gram `F^H F` used for column normalization.
    pub fn gram(&self) -> &HermitianPsdMatrix {
        &self.gram
    }

    /// Codebook index chosen for each user.
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// Number of users whose first-choice beam was already taken.
    pub fn duplicates_resolved(&self) -> usize {
        self.duplicates_resolved
    }

    /// Whether F is numerically rank deficient despite duplicate resolution.
    pub fn rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    pub fn antennas(&self) -> usize {
        self.f.rows()
    }

    pub fn users(&self) -> usize {
        self.f.cols()
    }
}

/// Exhaustive per-user beam search: user `k` gets the codeword maximizing
/// `|h_k^H f|²` among codewords no earlier user holds. When a user's true
/// argmax is already taken, the user is bumped to its best free codeword and
/// counted in [`AnalogBeamformer::duplicates_resolved`]; this keeps the
/// columns distinct so F stays full rank. Score ties break to the lowest
/// codebook index.
pub fn select_beams(
    h: &ChannelRealization,
    codebook: &RfCodebook,
) -> Result<AnalogBeamformer, PrecodingError> {
    let users = h.users();
    if users == 0 {
        return Err(PrecodingError::NoUsers);
    }
    if codebook.is_empty() {
        return Err(PrecodingError::EmptyCodebook);
    }
    if codebook.len() < users {
        return Err(PrecodingError::CodebookExhausted {
            needed: users,
            available: codebook.len(),
        });
    }
    let m = h.channel(0).len();
    if codebook.entry(0).len() != m {
        return Err(PrecodingError::DimensionMismatch {
            expected: m,
            actual: codebook.entry(0).len(),
        });
    }
    let mut taken = vec![false; codebook.len()];
    let mut selected = Vec::with_capacity(users);
    let mut duplicates = 0;
    for k in 0..users {
        let hk = h.channel(k);
        let mut best_any = (0usize, -1.0f64);
        let mut best_free: Option<(usize, f64)> = None;
        for (q, f) in codebook.entries().iter().enumerate() {
            let score = vdot(hk, f).norm_sqr();
            if score > best_any.1 {
                best_any = (q, score);
            }
            if !taken[q] && best_free.map_or(true, |(_, s)| score > s) {
                best_free = Some((q, score));
            }
        }
        let (pick, _) = best_free.expect("codebook has at least `users` free codewords");
        if taken[best_any.0] {
            duplicates += 1;
        }
        taken[pick] = true;
        selected.push(pick);
    }
    let columns: Vec<Vec<Complex64>> = selected
        .iter()
        .map(|&q| codebook.entry(q).to_vec())
        .collect();
    let mut analog = AnalogBeamformer::from_columns(&columns, selected)?;
    analog.duplicates_resolved = duplicates;
    Ok(analog)
}

/// Effective channel seen through the analog stage: `F^H h`.
pub fn effective_channel(f: &AnalogBeamformer, h: &[Complex64]) -> Vec<Complex64> {
    f.matrix().adjoint_matvec(h)
}

/// Effective covariance seen through the analog stage: `F^H R F`.
pub fn effective_covariance(
    f: &AnalogBeamformer,
    r: &HermitianPsdMatrix,
) -> Result<HermitianPsdMatrix, PrecodingError> {
    if r.dim() != f.antennas() {
        return Err(PrecodingError::DimensionMismatch {
            expected: f.antennas(),
            actual: r.dim(),
        });
    }
    Ok(HermitianPsdMatrix::from_congruence(f.matrix(), r))
}

/// Channel state the digital stage designs against: long-term effective
/// covariances for the one-stage statistical schemes, or per-user quantized
/// effective channels `ĥ = ‖h_eff‖ · codeword` for the two-stage schemes.
#[derive(Debug, Clone)]
pub enum EffectiveCsit {
    Statistical(Vec<HermitianPsdMatrix>),
    Quantized(Vec<Vec<Complex64>>),
}

impl EffectiveCsit {
    pub fn users(&self) -> usize {
        match self {
            Self::Statistical(r) => r.len(),
            Self::Quantized(h) => h.len(),
        }
    }
}

// --- Hybrid precoder ---------------------------------------------------------------

/// Analog beamformer plus a normalized digital stage: `‖F w_k‖ = 1` for
/// every column.
#[derive(Debug, Clone)]
pub struct HybridPrecoder {
    analog: AnalogBeamformer,
    digital: ComplexMatrix,
}

impl HybridPrecoder {
    pub fn analog(&self) -> &AnalogBeamformer {
        &self.analog
    }

    /// The K×K digital matrix W.
    pub fn digital(&self) -> &ComplexMatrix {
        &self.digital
    }

    /// Digital column `w_k`.
    pub fn column(&self, k: usize) -> Vec<Complex64> {
        self.digital.column(k)
    }

    /// The cascaded M×K precoder `F·W`.
    pub fn full_matrix(&self) -> ComplexMatrix {
        self.analog.matrix().mul(&self.digital)
    }

    pub fn users(&self) -> usize {
        self.digital.cols()
    }
}

/// Scales each digital column so `‖F w_k‖ = 1`, using the analog gram.
fn normalize_through_analog(
    f: &AnalogBeamformer,
    columns: Vec<Vec<Complex64>>,
) -> Result<HybridPrecoder, PrecodingError> {
    let k_users = f.users();
    let mut normalized = Vec::with_capacity(columns.len());
    for (k, col) in columns.into_iter().enumerate() {
        if col.len() != k_users {
            return Err(PrecodingError::DimensionMismatch {
                expected: k_users,
                actual: col.len(),
            });
        }
        let power = f.gram().quad_form(&col);
        if power <= 0.0 || !power.is_finite() {
            return Err(PrecodingError::ZeroColumn { user: k });
        }
        let scale = 1.0 / power.sqrt();
        normalized.push(col.iter().map(|v| v * scale).collect::<Vec<_>>());
    }
    let digital = ComplexMatrix::from_columns(&normalized)?;
    Ok(HybridPrecoder {
        analog: f.clone(),
        digital,
    })
}

fn check_statistical_inputs(
    f: &AnalogBeamformer,
    r_eff: &[HermitianPsdMatrix],
) -> Result<(), PrecodingError> {
    if r_eff.len() != f.users() {
        return Err(PrecodingError::DimensionMismatch {
            expected: f.users(),
            actual: r_eff.len(),
        });
    }
    for r in r_eff {
        if r.dim() != f.users() {
            return Err(PrecodingError::DimensionMismatch {
                expected: f.users(),
                actual: r.dim(),
            });
        }
    }
    Ok(())
}

fn check_quantized_inputs(
    f: &AnalogBeamformer,
    hhat_eff: &[Vec<Complex64>],
) -> Result<(), PrecodingError> {
    if hhat_eff.len() != f.users() {
        return Err(PrecodingError::DimensionMismatch {
            expected: f.users(),
            actual: hhat_eff.len(),
        });
    }
    for h in hhat_eff {
        if h.len() != f.users() {
            return Err(PrecodingError::DimensionMismatch {
                expected: f.users(),
                actual: h.len(),
            });
        }
    }
    Ok(())
}

// --- Digital designs ----------------------------------------------------------------

/// Statistical nullspace beamforming: `w_k` lies in the nullspace of the
/// other users' dominant effective directions; within that nullspace it
/// maximizes the own-signal quadratic form (projected dominant
/// eigenvector).
pub fn sbf_precoder(
    f: &AnalogBeamformer,
    r_eff: &[HermitianPsdMatrix],
) -> Result<HybridPrecoder, PrecodingError> {
    check_statistical_inputs(f, r_eff)?;
    let k_users = f.users();
    if k_users < 2 {
        return Err(PrecodingError::InvalidArgument(
            "nullspace beamforming needs at least two users".into(),
        ));
    }
    let dominant: Vec<Vec<Complex64>> = r_eff
        .iter()
        .map(|r| dominant_eigenvector(r.matrix()))
        .collect::<Result<_, _>>()?;
    let mut columns = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let others: Vec<Vec<Complex64>> = (0..k_users)
            .filter(|&j| j != k)
            .map(|j| dominant[j].clone())
            .collect();
        let (projector, spans_all) = nullspace_projector(&others, k_users)?;
        if spans_all {
            return Err(PrecodingError::SbfInfeasible { user: k });
        }
        // restrict the own covariance to the nullspace and take its top
        // eigenvector there; the projector is Hermitian, so P R P is the
        // congruence P^H R P (and gets exact-Hermitian storage that way)
        let projected = HermitianPsdMatrix::from_congruence(&projector, &r_eff[k]);
        columns.push(dominant_eigenvector(projected.matrix())?);
    }
    normalize_through_analog(f, columns)
}

/// Statistical SLNR design: `w_k` is the generalized dominant eigenvector of
/// `(R_{k,eff}, (1/ρ)I + Σ_{j≠k} R_{j,eff})`. Degenerate instances where the
/// quotient is flat (e.g. fully overlapping statistics) break ties toward
/// the user's own coordinate axis, keeping the design deterministic.
pub fn slnr_statistical_precoder(
    f: &AnalogBeamformer,
    r_eff: &[HermitianPsdMatrix],
    rho: f64,
) -> Result<HybridPrecoder, PrecodingError> {
    check_statistical_inputs(f, r_eff)?;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(PrecodingError::InvalidArgument(format!(
            "transmit SNR per stream must be positive and finite, got {rho}"
        )));
    }
    let k_users = f.users();
    let mut columns = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let mut denom = HermitianPsdMatrix::scaled_identity(k_users, 1.0 / rho);
        for (j, r) in r_eff.iter().enumerate() {
            if j != k {
                denom = denom.add(r);
            }
        }
        let mut prefer = vec![Complex64::new(0.0, 0.0); k_users];
        prefer[k] = Complex64::new(1.0, 0.0);
        columns.push(generalized_umax_with_preference(&r_eff[k], &denom, &prefer)?);
    }
    normalize_through_analog(f, columns)
}

/// Zero forcing on the quantized effective channels: `W = Ĥ(Ĥ^H Ĥ)^{-1}`.
pub fn zf_precoder(
    f: &AnalogBeamformer,
    hhat_eff: &[Vec<Complex64>],
) -> Result<HybridPrecoder, PrecodingError> {
    check_quantized_inputs(f, hhat_eff)?;
    let k_users = f.users();
    let hhat = ComplexMatrix::from_columns(hhat_eff)?;
    let gram = HermitianPsdMatrix::from_gram(&hhat.adjoint());
    let eig = eig_hermitian(gram.matrix())?;
    let lambda_max = eig.values[0].max(0.0);
    let lambda_min = eig.values[k_users - 1].max(0.0);
    if lambda_min <= 0.0 || lambda_max / lambda_min >= ZF_MAX_CONDITION * ZF_MAX_CONDITION {
        // gram eigenvalues are squared singular values, hence the squared
        // condition ceiling
        return Err(PrecodingError::RankDeficientChannel {
            smallest_singular_value: lambda_min.sqrt(),
        });
    }
    // W = Ĥ G^{-1}, column by column
    let mut columns = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let mut e = vec![Complex64::new(0.0, 0.0); k_users];
        e[k] = Complex64::new(1.0, 0.0);
        let x = solve_hermitian_pd(gram.matrix(), &e)?;
        columns.push(hhat.matvec(&x));
    }
    normalize_through_analog(f, columns)
}

/// Closed-form quantized SLNR design:
/// `w_k = ((1/ρ)I + Σ_{j≠k} ĥ_j ĥ_j^H)^{-1} ĥ_k`.
pub fn slnr_quantized_precoder(
    f: &AnalogBeamformer,
    hhat_eff: &[Vec<Complex64>],
    rho: f64,
) -> Result<HybridPrecoder, PrecodingError> {
    check_quantized_inputs(f, hhat_eff)?;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(PrecodingError::InvalidArgument(format!(
            "transmit SNR per stream must be positive and finite, got {rho}"
        )));
    }
    let k_users = f.users();
    let mut columns = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let mut denom = HermitianPsdMatrix::scaled_identity(k_users, 1.0 / rho);
        for (j, h) in hhat_eff.iter().enumerate() {
            if j != k {
                denom = denom.add(&HermitianPsdMatrix::from_outer(h));
            }
        }
        columns.push(solve_hermitian_pd(denom.matrix(), &hhat_eff[k])?);
    }
    normalize_through_analog(f, columns)
}
