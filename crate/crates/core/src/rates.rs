//! Shared per-user rate arithmetic.
//!
//! Both the plain transmission path and the rate-splitting private part call
//! into this module, so that a degenerate split (all power private) produces
//! bit-identical rates to the plain path — same operations in the same
//! order.

use num_complex::Complex64;

use crate::numerics::{vdot, ComplexMatrix};

/// Per-user rates `log2(1 + p·S_k / (1 + p·I_k))` where `S_k` is the
/// own-stream gain `|h_k^H w_k|²`, `I_k` the summed cross-stream gains, and
/// `p` the per-stream power.
pub(crate) fn private_rates(
    h_eff: &[Vec<Complex64>],
    w: &ComplexMatrix,
    power_per_stream: f64,
) -> Vec<f64> {
    let users = h_eff.len();
    let mut rates = Vec::with_capacity(users);
    for (k, h) in h_eff.iter().enumerate() {
        let mut signal = 0.0;
        let mut interference = 0.0;
        for j in 0..w.cols() {
            let gain = vdot(h, &w.column(j)).norm_sqr();
            if j == k {
                signal = gain;
            } else {
                interference += gain;
            }
        }
        let sinr = power_per_stream * signal / (1.0 + power_per_stream * interference);
        rates.push((1.0 + sinr).log2());
    }
    rates
}
