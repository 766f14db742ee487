//! Channel generation: ULA steering vectors, geometric and
//! virtual-channel-representation (VCR) scenarios, and covariance matrices.
//!
//! A scenario is instantiated once, which draws and freezes the angles of
//! departure (or assigns DFT columns for VCR kinds); fading realizations are
//! then drawn per trial with fresh path gains. VCR scenarios assign DFT
//! columns deterministically: contiguous blocks from column 0, disjoint per
//! user (non-overlapped), shared by all users (fully overlapped), or with the
//! first `ceil(overlap·L)` columns shared and the remainder disjoint
//! (partial overlap).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{ComplexMatrix, HermitianPsdMatrix};
use crate::rng::{self, SimRng};

/// Antenna spacing in wavelengths; the model fixes half-wavelength spacing.
pub const SPACING_OVER_WAVELENGTH: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("steering angle {theta} is outside [0, pi]")]
    ThetaOutOfRange { theta: f64 },
    #[error("{what} must be at least 1")]
    ZeroCount { what: &'static str },
    #[error("user count {users} exceeds antenna count {antennas}")]
    TooManyUsers { users: usize, antennas: usize },
    #[error("scenario needs {required} DFT columns but the array has only {antennas}")]
    NotEnoughColumns { required: usize, antennas: usize },
    #[error("overlap fraction {overlap} is outside [0, 1]")]
    OverlapOutOfRange { overlap: f64 },
}

/// Uniform linear array with half-wavelength spacing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    antennas: usize,
}

impl ArrayGeometry {
    pub fn new(antennas: usize) -> Result<Self, ChannelError> {
        if antennas == 0 {
            return Err(ChannelError::ZeroCount { what: "antennas" });
        }
        Ok(Self { antennas })
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn spacing_over_wavelength(&self) -> f64 {
        SPACING_OVER_WAVELENGTH
    }
}

/// Unit-norm ULA steering vector: entry `m` is `(1/√M)·exp(iπ·m·cos θ)`.
pub fn steering_vector(geom: ArrayGeometry, theta: f64) -> Result<Vec<Complex64>, ChannelError> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(ChannelError::ThetaOutOfRange { theta });
    }
    let m = geom.antennas();
    let scale = 1.0 / (m as f64).sqrt();
    let step = std::f64::consts::PI * theta.cos();
    Ok((0..m)
        .map(|i| {
            let (s, c) = (step * i as f64).sin_cos();
            Complex64::new(c * scale, s * scale)
        })
        .collect())
}

/// Column `q` of the M-point unitary DFT matrix: entry `m` is
/// `(1/√M)·exp(i·2π·m·q/M)`. These are the steering vectors of the virtual
/// channel representation.
pub fn dft_column(geom: ArrayGeometry, q: usize) -> Vec<Complex64> {
    let m = geom.antennas();
    assert!(q < m, "DFT column index out of range");
    let scale = 1.0 / (m as f64).sqrt();
    let step = 2.0 * std::f64::consts::PI * q as f64 / m as f64;
    (0..m)
        .map(|i| {
            let (s, c) = (step * i as f64).sin_cos();
            Complex64::new(c * scale, s * scale)
        })
        .collect()
}

/// Angle of departure whose steering vector coincides with DFT column `q`:
/// `cos θ = 2q/M` mapped into [−1, 1].
pub fn dft_column_angle(geom: ArrayGeometry, q: usize) -> f64 {
    let m = geom.antennas() as f64;
    let mut c = 2.0 * q as f64 / m;
    if c > 1.0 {
        c -= 2.0;
    }
    c.acos()
}

/// How user path directions are generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Geometric channel, AoDs drawn uniformly on [0, π] per user and path.
    UniformIidAods,
    /// VCR with disjoint DFT columns per user (requires K·L ≤ M).
    NonOverlappedVcr,
    /// VCR with all users sharing the same L DFT columns.
    FullyOverlappedVcr,
    /// VCR with the first `ceil(overlap·L)` columns shared, rest disjoint.
    PartialOverlapVcr,
}

/// Declarative description of a channel scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Transmit antennas M.
    pub antennas: usize,
    /// Users K.
    pub users: usize,
    /// Paths per user L.
    pub paths: usize,
    /// Shared-path fraction for the partial-overlap kind; ignored otherwise.
    #[serde(default)]
    pub overlap: f64,
    /// Seed for the AoD draw at instantiation.
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.antennas == 0 {
            return Err(ChannelError::ZeroCount { what: "antennas" });
        }
        if self.users == 0 {
            return Err(ChannelError::ZeroCount { what: "users" });
        }
        if self.paths == 0 {
            return Err(ChannelError::ZeroCount { what: "paths" });
        }
        if self.users > self.antennas {
            return Err(ChannelError::TooManyUsers {
                users: self.users,
                antennas: self.antennas,
            });
        }
        let required = match self.kind {
            ScenarioKind::UniformIidAods => 0,
            ScenarioKind::NonOverlappedVcr => self.users * self.paths,
            ScenarioKind::FullyOverlappedVcr => self.paths,
            ScenarioKind::PartialOverlapVcr => {
                if !(0.0..=1.0).contains(&self.overlap) {
                    return Err(ChannelError::OverlapOutOfRange {
                        overlap: self.overlap,
                    });
                }
                let shared = (self.overlap * self.paths as f64).ceil() as usize;
                shared + self.users * (self.paths - shared)
            }
        };
        if required > self.antennas {
            return Err(ChannelError::NotEnoughColumns {
                required,
                antennas: self.antennas,
            });
        }
        Ok(())
    }

    /// Copy with a different AoD seed (used to redraw user placements per
    /// trial in the uniform-iid scenario).
    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Per-user propagation paths: angles of departure and complex gains.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    /// `aods[k][l]` in [0, π].
    pub aods: Vec<Vec<f64>>,
    /// `gains[k][l]`, unit-variance circularly-symmetric Gaussian draws.
    pub gains: Vec<Vec<Complex64>>,
}

/// One fading realization: per-user channel vectors plus the generating paths.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    channels: Vec<Vec<Complex64>>,
    paths: PathSet,
}

impl ChannelRealization {
    pub fn users(&self) -> usize {
        self.channels.len()
    }

    /// Channel vector `h_k`, length M.
    pub fn channel(&self, user: usize) -> &[Complex64] {
        &self.channels[user]
    }

    pub fn channels(&self) -> &[Vec<Complex64>] {
        &self.channels
    }

    pub fn paths(&self) -> &PathSet {
        &self.paths
    }
}

/// Rebuilds `h = √(M/L)·Σ_l g_l·a(θ_l)` from stored paths; the realization
/// invariant is that this reproduces the drawn channel within 1e-12.
pub fn channel_from_paths(
    geom: ArrayGeometry,
    aods: &[f64],
    gains: &[Complex64],
) -> Result<Vec<Complex64>, ChannelError> {
    let m = geom.antennas();
    let l = aods.len();
    let scale = (m as f64 / l as f64).sqrt();
    let mut h = vec![Complex64::new(0.0, 0.0); m];
    for (&theta, &g) in aods.iter().zip(gains) {
        let a = steering_vector(geom, theta)?;
        for (hi, ai) in h.iter_mut().zip(&a) {
            *hi += g * ai * scale;
        }
    }
    Ok(h)
}

/// An instantiated scenario: geometry plus frozen path directions.
#[derive(Debug, Clone)]
pub struct Scenario {
    geom: ArrayGeometry,
    kind: ScenarioKind,
    paths_per_user: usize,
    /// Equivalent AoDs, per user.
    aods: Vec<Vec<f64>>,
    /// Steering matrices `A_k` (M×L), cached at instantiation. For VCR kinds
    /// these are exact DFT columns.
    steering: Vec<ComplexMatrix>,
    /// DFT column assignment per user, for VCR kinds.
    dft_columns: Option<Vec<Vec<usize>>>,
}

impl Scenario {
    /// Draws (uniform-iid) or assigns (VCR) every user's path directions.
    pub fn instantiate(spec: &ScenarioSpec) -> Result<Self, ChannelError> {
        spec.validate()?;
        let geom = ArrayGeometry::new(spec.antennas)?;
        let (k, l) = (spec.users, spec.paths);
        match spec.kind {
            ScenarioKind::UniformIidAods => {
                let mut rng = SimRng::substream(spec.seed, rng::stream::AODS, 0);
                let mut aods = Vec::with_capacity(k);
                let mut steering = Vec::with_capacity(k);
                for _ in 0..k {
                    let user_aods: Vec<f64> = (0..l)
                        .map(|_| rng.uniform_in(0.0, std::f64::consts::PI))
                        .collect();
                    steering.push(steering_matrix_from_aods(geom, &user_aods)?);
                    aods.push(user_aods);
                }
                Ok(Self {
                    geom,
                    kind: spec.kind,
                    paths_per_user: l,
                    aods,
                    steering,
                    dft_columns: None,
                })
            }
            ScenarioKind::NonOverlappedVcr
            | ScenarioKind::FullyOverlappedVcr
            | ScenarioKind::PartialOverlapVcr => {
                let columns = assign_dft_columns(spec);
                let mut aods = Vec::with_capacity(k);
                let mut steering = Vec::with_capacity(k);
                for user_cols in &columns {
                    aods.push(
                        user_cols
                            .iter()
                            .map(|&q| dft_column_angle(geom, q))
                            .collect(),
                    );
                    let cols: Vec<Vec<Complex64>> =
                        user_cols.iter().map(|&q| dft_column(geom, q)).collect();
                    steering.push(
                        ComplexMatrix::from_columns(&cols).expect("DFT columns are finite"),
                    );
                }
                Ok(Self {
                    geom,
                    kind: spec.kind,
                    paths_per_user: l,
                    aods,
                    steering,
                    dft_columns: Some(columns),
                })
            }
        }
    }

    pub fn geometry(&self) -> ArrayGeometry {
        self.geom
    }

    pub fn kind(&self) -> ScenarioKind {
        self.kind
    }

    pub fn users(&self) -> usize {
        self.aods.len()
    }

    pub fn paths_per_user(&self) -> usize {
        self.paths_per_user
    }

    pub fn aods(&self) -> &[Vec<f64>] {
        &self.aods
    }

    /// Steering matrix `A_k` (M×L) of one user.
    pub fn steering_matrix(&self, user: usize) -> &ComplexMatrix {
        &self.steering[user]
    }

    /// DFT column assignment, present only for VCR kinds.
    pub fn dft_columns(&self) -> Option<&[Vec<usize>]> {
        self.dft_columns.as_deref()
    }

    /// Draws fresh path gains and assembles `h_k = √(M/L)·A_k·g_k` for every
    /// user. Draw order (user-major, path-minor) is part of the
    /// reproducibility contract.
    pub fn draw_channel(&self, rng: &mut SimRng) -> ChannelRealization {
        let m = self.geom.antennas();
        let l = self.paths_per_user;
        let scale = (m as f64 / l as f64).sqrt();
        let mut gains = Vec::with_capacity(self.users());
        let mut channels = Vec::with_capacity(self.users());
        for (a, _) in self.steering.iter().zip(&self.aods) {
            let g: Vec<Complex64> = (0..l).map(|_| rng.complex_normal()).collect();
            let mut h = a.matvec(&g);
            for v in &mut h {
                *v *= scale;
            }
            channels.push(h);
            gains.push(g);
        }
        ChannelRealization {
            channels,
            paths: PathSet {
                aods: self.aods.clone(),
                gains,
            },
        }
    }

    /// Long-term covariance `R_k = (M/L)·A_k·A_k^H`; trace M, rank ≤ L.
    pub fn covariance(&self, user: usize) -> HermitianPsdMatrix {
        let m = self.geom.antennas() as f64;
        let l = self.paths_per_user as f64;
        HermitianPsdMatrix::from_gram(&self.steering[user]).scaled(m / l)
    }
}

fn steering_matrix_from_aods(
    geom: ArrayGeometry,
    aods: &[f64],
) -> Result<ComplexMatrix, ChannelError> {
    let cols: Result<Vec<Vec<Complex64>>, ChannelError> = aods
        .iter()
        .map(|&theta| steering_vector(geom, theta))
        .collect();
    Ok(ComplexMatrix::from_columns(&cols?).expect("steering entries are finite"))
}

/// Deterministic DFT column assignment for the VCR kinds; validated by
/// `ScenarioSpec::validate`.
fn assign_dft_columns(spec: &ScenarioSpec) -> Vec<Vec<usize>> {
    let (k, l) = (spec.users, spec.paths);
    match spec.kind {
        ScenarioKind::NonOverlappedVcr => (0..k)
            .map(|user| (user * l..(user + 1) * l).collect())
            .collect(),
        ScenarioKind::FullyOverlappedVcr => (0..k).map(|_| (0..l).collect()).collect(),
        ScenarioKind::PartialOverlapVcr => {
            let shared = (spec.overlap * l as f64).ceil() as usize;
            let own = l - shared;
            (0..k)
                .map(|user| {
                    let mut cols: Vec<usize> = (0..shared).collect();
                    cols.extend(shared + user * own..shared + (user + 1) * own);
                    cols
                })
                .collect()
        }
        ScenarioKind::UniformIidAods => unreachable!("geometric scenarios have no DFT columns"),
    }
}
