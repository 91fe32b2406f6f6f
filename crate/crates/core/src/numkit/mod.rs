//! Minimal dense linear-algebra kernel with reverse-mode gradient
//! accumulation.
//!
//! Everything is 64-bit floats on scalar code paths: the model sizes in
//! this crate (a few hundred hidden units, vocabularies in the low
//! thousands) do not warrant SIMD or GPU plumbing, and doubles keep the
//! finite-difference checks tight.

mod matrix;
mod rng;
mod tape;

pub use matrix::Matrix;
pub use rng::SplitMix64;
pub use tape::{grad_check, GradientLedger, NodeId, ParamId, ParamSet, Tape};

use thiserror::Error;

/// Errors raised by the numeric kernel.
#[derive(Debug, Error)]
pub enum NumError {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("probability {value} at index {index} is not in (0, 1]")]
    InvalidProbability { index: usize, value: f64 },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("node id {0} was not recorded on this tape")]
    UnknownNode(usize),
    #[error("parameter id {0} is not registered in this parameter set")]
    UnknownParam(usize),
    #[error("backward requires a scalar loss node, got length {0}")]
    NonScalarLoss(usize),
}
