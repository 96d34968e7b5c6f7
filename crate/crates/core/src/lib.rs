//! Lyrics-based music emotion recognition at desk scale.
//!
//! The crate is organized around a small reverse-mode autodiff tensor core
//! ([`tensor`]), a relative-attention transformer encoder with optional
//! segment recurrence ([`encoder`]), a shared-trunk multi-task classifier
//! ([`heads`]), a training engine with AdamW and checkpointing ([`train`]),
//! macro/micro-F1 evaluation ([`eval`]), a labeled-lyrics corpus pipeline
//! ([`corpus`]), and a resilient lyrics crawler ([`fetch`]).

pub mod corpus;
pub mod diagnostics;
pub mod encoder;
pub mod eval;
pub mod fetch;
pub mod heads;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod train;

pub use model::EmotionModel;
pub use rng::SeedRng;
pub use tensor::{Mode, Tensor, TensorError};
