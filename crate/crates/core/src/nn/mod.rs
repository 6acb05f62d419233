//! Inference runtime for the residual echo suppression network.
//!
//! [`arch`] is the normative layer table, [`weights`] the on-disk format,
//! [`ops`] the primitive layers and [`model`] the two-headed forward pass.

pub mod arch;
pub mod fixtures;
pub mod model;
pub mod ops;
pub mod tensor;
pub mod weights;

pub use arch::Architecture;
pub use model::{forward, Model, ModelOutput};
pub use tensor::Tensor;
pub use weights::{load_weights, WeightBundle, WeightError};
