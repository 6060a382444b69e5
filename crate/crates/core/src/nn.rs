//! Minimal dense-tensor stack with reverse-mode gradients.
//!
//! Only the operations the models need are implemented: matrix products,
//! elementwise activations, row pooling/broadcasting, a symmetric sparse
//! aggregation (for graph convolutions), layer normalization, and the
//! scalar glue required to assemble losses. Gradients flow through a
//! [`tape::Tape`] recorded per forward pass; parameters live in a named
//! [`params::ParamSet`] updated by [`params::Adam`].

pub mod params;
pub mod tape;
pub mod tensor;

pub use params::{
    checkpoint_from_text, checkpoint_to_text, Adam, CheckpointError, Param, ParamSet,
};
pub use tape::{SparseSym, Tape, ValueId};
pub use tensor::{Tensor, TensorError};
