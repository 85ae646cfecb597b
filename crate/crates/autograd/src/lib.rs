//! Double-precision tensors with tape-based reverse-mode differentiation.
//!
//! Values live in [`Tensor`]s; computations are recorded on a [`Tape`] as
//! [`Var`] handles, and [`Tape::backward`] returns [`Gradients`] for leaves
//! and for parameters registered through a [`ParamStore`].

mod error;
pub mod gradcheck;
pub mod ops;
mod optim;
mod params;
mod tape;
mod tensor;

pub use error::TensorError;
pub use ops::{huber_value, sigmoid};
pub use optim::{Adam, AdamConfig};
pub use params::{ParamEntry, ParamId, ParamKind, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
