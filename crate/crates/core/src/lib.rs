//! Link-level simulation of frequency-domain precoded block transmission over
//! highly frequency-selective channels.
//!
//! Three unitary precoders are supported: the full DFT, the sparse DFT
//! (`F_Q ⊗ I_P`) and the sparse Walsh-Hadamard (`W_Q ⊗ I_P`). Two families of
//! soft-input soft-output detectors close a turbo loop with a BCJR decoder of
//! the rate-1/2 `[1, 5/7]` recursive systematic convolutional code:
//!
//! * [`map_detector`]: exact, Log-MAP and Max-Log-MAP detection for the sparse
//!   Walsh-Hadamard precoder, using I/Q-separable processing and a precomputed
//!   table of squared errors over the small set of spread amplitudes.
//! * [`epic_detector`]: the self-iterated one-tap frequency-domain equalizer
//!   with expectation-propagation feedback, for all three precoders, plus a
//!   VAMP-style damping variant.
//!
//! The [`harness`] module drives Monte-Carlo FER sweeps, EXIT trajectories and
//! operation-count reports.

pub mod channel;
pub mod epic_detector;
mod error;
pub mod fec;
pub mod harness;
pub mod map_detector;
pub mod numerics;
pub mod ops;
pub mod precode;
pub mod selftest;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;

/// Magnitude at which every LLR in the receiver is clipped.
pub const LLR_MAX: f64 = 60.0;

/// Clips an LLR to `[-LLR_MAX, LLR_MAX]`, mapping NaN to zero.
#[inline]
pub fn clip_llr(l: f64) -> f64 {
    if l.is_nan() {
        0.0
    } else {
        l.clamp(-LLR_MAX, LLR_MAX)
    }
}
