//! Training objectives: word-aligned contrastive loss, cross-entropy, and
//! the policy attention mask used to train for streaming.

mod ce;
mod stage2;
mod waco;

pub use ce::{masked_ce, masked_ce_grad, sample_k, KSampler};
pub use stage2::{build_stage2_mask, stage2_logit_equivalence, wait_k_schedule, Stage2MaskSpec};
pub use waco::{
    group_words, group_words_backward, waco_loss, waco_loss_grad, WacoGrad, WordAlignment,
    WordSpan, DEFAULT_TAU,
};
