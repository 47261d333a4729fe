//! Compact policy-value network with hand-written reverse-mode gradients.
//!
//! The shape is a fully connected trunk, an optional gated recurrent cell,
//! and four linear heads: high-level logits over sub-policy priors,
//! low-level action logits conditioned on a one-hot prior, and one value
//! head per level. Everything runs in `f64`.

mod adam;
mod model_file;
mod network;
mod params;
mod spec;

use thiserror::Error;

pub use adam::{adam_update, AdamState, LrSchedule};
pub use model_file::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use network::{ForwardCache, HeadCotangents, HeadOutputs, Network, POLICY_HEAD_INIT_SCALE};
pub use params::{Gradient, ParamStore, RecurrentState};
pub use spec::{Activation, NetworkSpec, ParamLayout, RecurrentCell, TensorSlot};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApproxError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("input has length {got}, spec expects {expected}")]
    InputMismatch { expected: usize, got: usize },
    #[error("recurrent state has length {got}, spec expects {expected}")]
    HiddenMismatch { expected: usize, got: usize },
    #[error("prior {prior} out of range for {num_priors} priors")]
    PriorOutOfRange { prior: usize, num_priors: usize },
    #[error("parameter vector has length {got}, expected {expected}")]
    ParamMismatch { expected: usize, got: usize },
    #[error("cotangent mismatch: {0}")]
    CotangentMismatch(&'static str),
    #[error("diverged: {0}")]
    Diverged(String),
    #[error("model checksum mismatch")]
    ChecksumMismatch,
    #[error("corrupt model file: {0}")]
    CorruptModel(String),
    #[error("io: {0}")]
    Io(String),
}
