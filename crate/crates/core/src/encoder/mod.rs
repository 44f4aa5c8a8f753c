//! Speech side: causal front-end, blockwise-causal encoder, adapter.

mod adapter;
mod blockwise;
mod conv;
mod features;
mod stream;

pub use adapter::{Adapter, SpeechEmbeddings};
pub use blockwise::{build_blockwise_mask, Encoder, EncoderCache};
pub use conv::CausalConv1d;
pub use features::{FeatureExtractor, FeatureStream};
pub use stream::{read_f32_le, write_f32_le, SegmentSource, StreamManifest, WaveformSegment};
