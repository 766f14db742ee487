//! Reproducible random-number utilities.
//!
//! Every stochastic quantity in the simulator is drawn from a [`SimRng`],
//! a named, seedable, portable generator (ChaCha8) with Gaussian variates
//! produced by Box–Muller from the uniform stream. Substreams for trials,
//! users, and purposes are derived from one master seed through a splitmix64
//! chain, so parallel Monte Carlo runs are bit-identical regardless of
//! execution order, platform, or thread count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream tags keep the seed chains of unrelated draw purposes disjoint.
/// The numeric values are part of the reproducibility contract.
pub mod stream {
    /// Scenario instantiation: angles of departure / DFT column choices.
    pub const AODS: u64 = 1;
    /// Per-trial path gains.
    pub const GAINS: u64 = 2;
    /// Quantization codebook construction.
    pub const CODEBOOK: u64 = 3;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent substream seed from `(master, tag, index)`.
///
/// Chained splitmix64 steps: each argument perturbs the state before one
/// mixing round, so distinct tuples land in distinct, well-separated streams.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    let mut state = master;
    let a = splitmix64(&mut state);
    let mut state = a ^ tag;
    let b = splitmix64(&mut state);
    let mut state = b ^ index;
    splitmix64(&mut state)
}

/// Deterministic random stream for simulation draws.
#[derive(Debug, Clone)]
pub struct SimRng {
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Substream for `(master, tag, index)`; see [`derive_seed`].
    pub fn substream(master: u64, tag: u64, index: u64) -> Self {
        Self::from_seed(derive_seed(master, tag, index))
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform draw on `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// One pair of independent standard normal draws via Box–Muller.
    ///
    /// The radial uniform is mapped onto `(0, 1]` so the logarithm is always
    /// finite. Each call consumes exactly two uniform draws, which keeps draw
    /// counts (and therefore downstream streams) deterministic.
    pub fn standard_normal_pair(&mut self) -> (f64, f64) {
        let u1 = 1.0 - self.uniform(); // (0, 1]
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        (radius * angle.cos(), radius * angle.sin())
    }

    /// Circularly-symmetric complex normal draw with unit variance,
    /// `E|z|² = 1`.
    pub fn complex_normal(&mut self) -> Complex64 {
        let (re, im) = self.standard_normal_pair();
        Complex64::new(re, im) / 2.0_f64.sqrt()
    }
}
