//! Minimal dense numeric kernel.

mod attention;
pub mod block;
mod grad;
mod layers;
mod matrix;
mod rope;
pub mod weights;

pub use block::TransformerLayer;
pub use attention::{attend_heads, masked_attention, AttentionMask};
pub use grad::finite_diff_grad;
pub use layers::{gelu, LayerNorm, Linear, Macs};
pub use matrix::{Matrix, Real};
pub use rope::RotaryTable;
pub use weights::{Initializer, WeightStore};
