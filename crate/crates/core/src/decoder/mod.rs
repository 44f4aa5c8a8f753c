//! Toy decoder-only language model over interleaved speech and text rows.

mod generate;
mod layout;
mod model;
mod vocab;

pub use generate::{greedy_generate, GenerateLimits, Generation, StopReason};
pub use layout::{assign_positions, build_consistency_mask, InterleavedLayout, Modality};
pub use model::{CacheMark, Decoder, DecoderCache, DecoderOutput};
pub use vocab::{TokenId, Vocabulary, WordRule, WordTracker};
