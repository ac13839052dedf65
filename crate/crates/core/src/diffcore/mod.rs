//! Minimal dense-tensor arithmetic with reverse-mode differentiation.
//!
//! The primitive set is exactly what affine models, small MLPs, the attack
//! objectives, and the bias regularizer need: matrix multiply, (broadcast)
//! add, ReLU, tanh, scalar multiply, softmax, log-sum-exp, L2 norm, and a
//! fused softmax-cross-entropy. Everything runs in f64; any non-finite
//! intermediate is surfaced as an error rather than propagated.

mod graph;
mod tensor;

pub use graph::{Graph, NodeId};
pub use tensor::Tensor;
