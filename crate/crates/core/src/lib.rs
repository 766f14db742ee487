//! Multiuser mmWave hybrid precoding and rate-splitting simulation library.
//!
//! The crate models a single-cell downlink where a base station with a large
//! uniform linear array serves several single-antenna users through a hybrid
//! precoder: an analog constant-modulus beamformer selected from a codebook,
//! followed by a low-dimensional digital precoder designed from statistical or
//! quantized channel knowledge. On top of the linear designs, a rate-splitting
//! mode superposes a common message, optimized by successive convex
//! approximation, to recover multiplexing performance under imperfect channel
//! knowledge.
//!
//! Module map:
//! - [`numerics`]: dense complex linear algebra (Jacobi eigensolver, Cholesky,
//!   generalized eigenvectors) and the interior-point subproblem solver.
//! - [`channel`]: geometric and virtual-representation channel generation.
//! - [`codebook`]: RF beamsteering, i.i.d. quantization, and skewed codebooks.
//! - [`precoding`]: analog beam selection and the digital precoder designs.
//! - [`rate_splitting`]: power splitting, common-precoder optimization, and
//!   the rate-splitting rate formulas and bounds.
//! - [`evaluation`]: Monte Carlo engine, closed-form oracles, and reports.

pub mod channel;
pub mod codebook;
pub mod evaluation;
pub mod numerics;
pub mod precoding;
pub(crate) mod rates;
pub mod rate_splitting;
pub mod rng;
