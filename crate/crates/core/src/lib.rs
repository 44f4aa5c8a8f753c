//! Streaming speech-to-text translation without recomputation.
//!
//! The crate is a small, dependency-light transformer inference engine built
//! around one idea: every representation attributed to already-received audio
//! or already-emitted text is computed exactly once. The pieces are
//!
//! - [`tensor`]: dense matrices, masked attention, rotary embeddings, layer
//!   primitives, weight files and a finite-difference gradient oracle;
//! - [`encoder`]: causal convolutional front-end, blockwise-causal encoder with
//!   a block-level KV cache, and the length-reducing causal adapter;
//! - [`decoder`]: a toy decoder-only language model fed interleaved speech and
//!   text rows under a consistency mask, with separate position counters and
//!   greedy word-level generation;
//! - [`streaming`]: wait-k-stride-n and hold-n read/write policies, the clock
//!   used for computation-aware timing, and the session event log;
//! - [`losses`]: word-aligned contrastive loss, policy-masked cross-entropy
//!   and the training-mask builder;
//! - [`harness`]: LAAL / LAAL-CA, BLEU-lite, the scaling benchmark and the
//!   command-line front-end.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod config;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod losses;
pub mod model;
pub mod streaming;
pub mod tensor;

pub use config::ModelConfig;
pub use error::{Error, Result};
pub use model::Model;
pub use tensor::{Matrix, Real};

/// Version tag written into every file format produced by this crate.
pub const FORMAT_VERSION: u32 = 1;
