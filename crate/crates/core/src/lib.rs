//! Nonholonomic geodesics, connection tensors and Jacobi fields.
//!
//! Models are described in a single chart by a metric, a frame and an
//! annihilator for the constraint distribution, and an optional potential.
//! Every derivative the engine needs is obtained by running the model
//! evaluators on jets, so a model is just a handful of generic functions.

// Index loops mirror the tensor formulas; `!(x > 0.0)` also rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod field;
pub mod io;
pub mod jacobi;
pub mod jet;
pub mod lift;
pub mod linalg;
pub mod model;
pub mod sampling;
pub mod symmetry;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
