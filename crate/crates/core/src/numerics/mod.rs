//! Dense tensors, reverse-mode differentiation, Adam and a seeded RNG.
//!
//! Everything runs on `f64` so analytic gradients can be checked against
//! central finite differences at tight tolerances.

mod adam;
mod checkpoint;
pub mod gradcheck;
mod graph;
mod params;
mod rng;
mod tensor;

pub use adam::{AdamState, ParamGrads};
pub use checkpoint::{checkpoint_bytes, read_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub(crate) use graph::{sigmoid, softplus};
pub use graph::{Gradients, Graph, Var};
pub use params::{ParamId, ParamSet};
pub use rng::{seeded_rng, SeededRng};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("invalid tensor shape {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("non-finite value at position {0}")]
    NonFinite(usize),
    #[error("backward requires a scalar output, got shape {0:?}")]
    NonScalarOutput(Vec<usize>),
    #[error("node does not belong to this graph")]
    DetachedNode,
    #[error("parameter layout mismatch: {0}")]
    ParamLayout(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Inverted-dropout mask: each entry is 0 with probability `p`, else `1/(1-p)`.
pub fn dropout_mask(shape: &[usize], p: f64, rng: &mut SeededRng) -> Tensor {
    let n: usize = shape.iter().product();
    let keep = 1.0 / (1.0 - p);
    let data = (0..n)
        .map(|_| if rng.bernoulli(p) { 0.0 } else { keep })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("mask values are finite")
}
