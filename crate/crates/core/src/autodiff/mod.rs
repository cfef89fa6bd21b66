//! Minimal reverse-mode automatic differentiation over dense `f64` matrices.

mod init;
mod optim;
mod tape;
mod tensor;

pub use init::{derive_seed, xavier_init};
pub use optim::Adam;
pub use tape::{softmax_rows, Gradients, Mode, Segments, Tape, Var};
pub use tensor::Tensor;

pub(crate) use tape::sigmoid;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdError {
    #[error("non-finite value produced by `{primitive}`")]
    NonFinite { primitive: &'static str },
    #[error("backward called on a value that does not depend on any parameter")]
    Detached,
    #[error("backward needs a scalar loss, got shape {shape:?}")]
    NotScalar { shape: (usize, usize) },
    #[error("shape mismatch for parameter {index}: {expected:?} vs {found:?}")]
    ShapeMismatch { index: usize, expected: (usize, usize), found: (usize, usize) },
}
