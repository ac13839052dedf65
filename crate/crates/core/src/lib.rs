//! Robustness-bias auditing for classifiers.
//!
//! A classifier exhibits robustness bias when some partition of the data
//! (a class, or the carriers of a sensitive-attribute value) sits
//! systematically closer to the decision boundary than the rest. This crate
//! computes per-example distances to the boundary three ways (exactly for
//! affine models, as attack-based upper bounds from DeepFool and
//! Carlini-Wagner L2, and as smoothing-based certified lower bounds) and
//! aggregates them into
//! survival curves, the RB gap, and the signed relative-AUC score, plus a
//! regularized training objective that penalizes the gap.
//!
//! Modules map onto the pipeline stages:
//!
//! * [`diffcore`]: dense tensors with reverse-mode differentiation
//! * [`data`]: datasets, CSV I/O, partitions, synthetic generators
//! * [`models`]: affine and MLP classifiers, SGD training, the regularizer
//! * [`geometry`]: exact distances for affine models, bisection probe
//! * [`attacks`]: upper-bound estimators
//! * [`smoothing`]: certified lower bounds via randomized smoothing
//! * [`metrics`]: curves, RB, sigma, sign agreement

pub mod attacks;
pub mod data;
pub mod diffcore;
mod error;
pub mod geometry;
pub mod metrics;
pub mod models;
mod parallel;
pub mod sampling;
pub mod smoothing;

pub use error::{Error, Result};
