//! RF beamsteering codebooks, i.i.d. quantization codebooks, and
//! statistics-skewed codebooks, plus effective-channel quantization.
//!
//! The i.i.d. construction draws seeded random unit vectors entry by entry,
//! so books of different sizes from the same seed are nested (the unrefined
//! book is the classic random-vector-quantization baseline). The optional
//! refinement improves the minimum pairwise chordal distance monotonically:
//! it repeatedly nudges the closest pair of codewords apart and accepts an
//! update only when the minimum distance strictly improves, halving the step
//! on rejection. This directly optimizes the max-min packing objective and
//! terminates after 200 iterations or once the step underflows.

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::{dft_column, dft_column_angle, steering_vector, ArrayGeometry};
use crate::numerics::{psd_sqrt, vdot, vnormalize, HermitianPsdMatrix, NumericsError};
use crate::rng::SimRng;

/// Iteration cap for the max-min refinement.
const REFINE_MAX_ITERS: usize = 200;
/// Step floor; refinement stops once repeated rejections shrink the step
/// below this (relative improvement has stalled below 1e-6).
const REFINE_MIN_STEP: f64 = 1e-6;
/// Norm below which a skewed codeword is considered annihilated by the
/// covariance square root and the degenerate fallback kicks in.
const SKEW_DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CodebookError {
    #[error("codebook has no entries")]
    EmptyCodebook,
    #[error("bit width {bits} is outside the supported range 1..=20")]
    BitsOutOfRange { bits: u32 },
    #[error("DFT codebook needs a power-of-two array, got {antennas} antennas")]
    AntennasNotPowerOfTwo { antennas: usize },
    #[error("quantizer input must be unit norm, got norm {norm}")]
    DirectionNotUnit { norm: f64 },
    #[error("codeword length {actual} does not match expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("malformed codebook CSV at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

fn check_bits(bits: u32) -> Result<usize, CodebookError> {
    if !(1..=20).contains(&bits) {
        return Err(CodebookError::BitsOutOfRange { bits });
    }
    Ok(1usize << bits)
}

// --- RF beamsteering codebook -------------------------------------------------

/// Codebook of constant-modulus steering vectors for the analog stage.
#[derive(Debug, Clone)]
pub struct RfCodebook {
    entries: Vec<Vec<Complex64>>,
    angles: Vec<f64>,
    bits: u32,
}

impl RfCodebook {
    pub fn entries(&self) -> &[Vec<Complex64>] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> &[Complex64] {
        &self.entries[i]
    }

    /// Beam angles, aligned with `entries`.
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Beamsteering codebook at angles `θ_q = π·q/Q`, `q = 1..Q`, `Q = 2^bits`.
pub fn build_rf_codebook(geom: ArrayGeometry, bits: u32) -> Result<RfCodebook, CodebookError> {
    let q_total = check_bits(bits)?;
    let mut entries = Vec::with_capacity(q_total);
    let mut angles = Vec::with_capacity(q_total);
    for q in 1..=q_total {
        let theta = std::f64::consts::PI * q as f64 / q_total as f64;
        angles.push(theta);
        entries.push(steering_vector(geom, theta).expect("grid angles lie in [0, pi]"));
    }
    Ok(RfCodebook {
        entries,
        angles,
        bits,
    })
}

/// DFT-column variant of the RF codebook: all `M` columns of the M-point DFT
/// matrix, used by the closed-form oracle scenarios where beam selection must
/// land exactly on virtual-representation directions. Requires a
/// power-of-two array so the size is `2^bits`.
pub fn build_dft_rf_codebook(geom: ArrayGeometry) -> Result<RfCodebook, CodebookError> {
    let m = geom.antennas();
    if !m.is_power_of_two() {
        return Err(CodebookError::AntennasNotPowerOfTwo { antennas: m });
    }
    let bits = m.trailing_zeros();
    let entries: Vec<Vec<Complex64>> = (0..m).map(|q| dft_column(geom, q)).collect();
    let angles: Vec<f64> = (0..m).map(|q| dft_column_angle(geom, q)).collect();
    Ok(RfCodebook {
        entries,
        angles,
        bits,
    })
}

// --- Quantization codebooks ----------------------------------------------------

/// Codebook of unit-norm vectors in the effective (post-beamforming) space.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantCodebook {
    entries: Vec<Vec<Complex64>>,
    bits: u32,
}

impl QuantCodebook {
    pub fn entries(&self) -> &[Vec<Complex64>] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> &[Complex64] {
        &self.entries[i]
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Minimum pairwise chordal distance `√(1 − |c_i^H c_j|²)`.
    pub fn min_chordal_distance(&self) -> f64 {
        min_chordal_distance(&self.entries)
    }

    /// Serializes one codeword per row as interleaved real/imag entries.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            let fields: Vec<String> = entry
                .iter()
                .flat_map(|v| [format!("{}", v.re), format!("{}", v.im)])
                .collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses the [`Self::to_csv`] format; round-trips bit-exactly.
    pub fn from_csv(text: &str) -> Result<Self, CodebookError> {
        let mut entries = Vec::new();
        let mut width = None;
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() % 2 != 0 {
                return Err(CodebookError::MalformedCsv {
                    line: idx + 1,
                    reason: "odd field count; entries are interleaved re,im pairs".into(),
                });
            }
            let mut entry = Vec::with_capacity(fields.len() / 2);
            for pair in fields.chunks(2) {
                let re: f64 = pair[0].trim().parse().map_err(|e| CodebookError::MalformedCsv {
                    line: idx + 1,
                    reason: format!("bad real part: {e}"),
                })?;
                let im: f64 = pair[1].trim().parse().map_err(|e| CodebookError::MalformedCsv {
                    line: idx + 1,
                    reason: format!("bad imaginary part: {e}"),
                })?;
                entry.push(Complex64::new(re, im));
            }
            match width {
                None => width = Some(entry.len()),
                Some(w) if w != entry.len() => {
                    return Err(CodebookError::MalformedCsv {
                        line: idx + 1,
                        reason: format!("expected {w} complex entries, got {}", entry.len()),
                    })
                }
                _ => {}
            }
            entries.push(entry);
        }
        if entries.is_empty() {
            return Err(CodebookError::EmptyCodebook);
        }
        let bits = entries.len().next_power_of_two().trailing_zeros().max(1);
        Ok(Self { entries, bits })
    }
}

fn min_chordal_distance(entries: &[Vec<Complex64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..entries.len() {
        for j in (i + 1)..entries.len() {
            worst = worst.max(vdot(&entries[i], &entries[j]).norm());
        }
    }
    (1.0 - (worst * worst).min(1.0)).max(0.0).sqrt()
}

/// Index of the closest pair (largest pairwise correlation).
fn worst_pair(entries: &[Vec<Complex64>]) -> (usize, usize) {
    let mut pair = (0, 1);
    let mut worst = -1.0;
    for i in 0..entries.len() {
        for j in (i + 1)..entries.len() {
            let corr = vdot(&entries[i], &entries[j]).norm();
            if corr > worst {
                worst = corr;
                pair = (i, j);
            }
        }
    }
    pair
}

/// Monotone max-min refinement: push the closest pair apart, keep an update
/// only if the global minimum distance improves.
fn refine_max_min(entries: &mut Vec<Vec<Complex64>>) {
    if entries.len() < 2 {
        return;
    }
    let mut best = min_chordal_distance(entries);
    let mut step = 0.5;
    for _ in 0..REFINE_MAX_ITERS {
        let (i, j) = worst_pair(entries);
        let ci = entries[i].clone();
        let cj = entries[j].clone();
        // Partial repulsion: remove a fraction of each codeword's component
        // along the other, then renormalize.
        let rho_ij = vdot(&cj, &ci); // c_j^H c_i
        let rho_ji = rho_ij.conj();
        let pushed_i: Vec<Complex64> = ci
            .iter()
            .zip(&cj)
            .map(|(a, b)| a - b * (rho_ij * step))
            .collect();
        let pushed_j: Vec<Complex64> = cj
            .iter()
            .zip(&ci)
            .map(|(a, b)| a - b * (rho_ji * step))
            .collect();
        let new_i = vnormalize(&pushed_i);
        let new_j = vnormalize(&pushed_j);
        let saved_i = std::mem::replace(&mut entries[i], new_i);
        let saved_j = std::mem::replace(&mut entries[j], new_j);
        let cand = min_chordal_distance(entries);
        if cand > best + 1e-15 {
            best = cand;
        } else {
            entries[i] = saved_i;
            entries[j] = saved_j;
            step *= 0.5;
            if step < REFINE_MIN_STEP {
                break;
            }
        }
    }
}

/// Builds `2^bits` seeded random unit vectors in `C^dim`; with `refine` set,
/// runs the monotone max-min chordal refinement. Entry `i` is a function of
/// the seed and `i` only, so books of different sizes from the same seed are
/// nested prefixes of each other (before refinement).
pub fn build_iid_codebook(
    dim: usize,
    bits: u32,
    seed: u64,
    refine: bool,
) -> Result<QuantCodebook, CodebookError> {
    let count = check_bits(bits)?;
    let mut rng = SimRng::from_seed(seed);
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let v: Vec<Complex64> = (0..dim).map(|_| rng.complex_normal()).collect();
        entries.push(vnormalize(&v));
    }
    if refine {
        refine_max_min(&mut entries);
    }
    Ok(QuantCodebook { entries, bits })
}

// --- Skewed codebook ------------------------------------------------------------

/// Quantization codebook adapted to one user's effective covariance:
/// entry `i` is `R^{1/2}·c_i` renormalized.
#[derive(Debug, Clone)]
pub struct SkewedCodebook {
    entries: Vec<Vec<Complex64>>,
    fallback_count: usize,
}

impl SkewedCodebook {
    pub fn entries(&self) -> &[Vec<Complex64>] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> &[Complex64] {
        &self.entries[i]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of base codewords that were annihilated by the covariance
    /// square root and replaced by the dominant eigenvector.
    pub fn fallback_count(&self) -> usize {
        self.fallback_count
    }
}

/// Skews a base codebook toward a covariance: entries `R^{1/2} c_i`
/// normalized. A codeword that lands in the nullspace of `R^{1/2}` (norm
/// below 1e-12) is replaced by the dominant eigenvector of `R_eff`, counted
/// in [`SkewedCodebook::fallback_count`].
pub fn skew(
    base: &QuantCodebook,
    r_eff: &HermitianPsdMatrix,
) -> Result<SkewedCodebook, CodebookError> {
    if base.is_empty() {
        return Err(CodebookError::EmptyCodebook);
    }
    let dim = base.entry(0).len();
    if r_eff.dim() != dim {
        return Err(CodebookError::LengthMismatch {
            expected: dim,
            actual: r_eff.dim(),
        });
    }
    let sqrt = psd_sqrt(r_eff)?;
    let mut dominant: Option<Vec<Complex64>> = None;
    let mut fallback_count = 0;
    let mut entries = Vec::with_capacity(base.len());
    for c in base.entries() {
        let mut v = sqrt.matvec(c);
        let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm < SKEW_DEGENERATE_TOL {
            let d = match &dominant {
                Some(d) => d.clone(),
                None => {
                    let d = crate::numerics::dominant_eigenvector(r_eff.matrix())?;
                    dominant = Some(d.clone());
                    d
                }
            };
            entries.push(d);
            fallback_count += 1;
        } else {
            for x in &mut v {
                *x /= norm;
            }
            entries.push(v);
        }
    }
    Ok(SkewedCodebook {
        entries,
        fallback_count,
    })
}

// --- Quantization ----------------------------------------------------------------

/// Picks the codeword maximizing `|direction^H c_i|²`; ties break to the
/// lowest index. The direction must be unit norm within 1e-9 (gain is fed
/// back separately, unquantized).
pub fn quantize<'a>(
    direction: &[Complex64],
    entries: &'a [Vec<Complex64>],
) -> Result<(usize, &'a [Complex64]), CodebookError> {
    if entries.is_empty() {
        return Err(CodebookError::EmptyCodebook);
    }
    let norm: f64 = direction.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(CodebookError::DirectionNotUnit { norm });
    }
    let mut best_idx = 0;
    let mut best = -1.0;
    for (i, c) in entries.iter().enumerate() {
        if c.len() != direction.len() {
            return Err(CodebookError::LengthMismatch {
                expected: direction.len(),
                actual: c.len(),
            });
        }
        let score = vdot(direction, c).norm_sqr();
        if score > best {
            best = score;
            best_idx = i;
        }
    }
    Ok((best_idx, &entries[best_idx]))
}
