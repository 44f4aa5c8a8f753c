//! Seeded incremental-versus-reference suites behind the `equiv` command.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::decoder::{build_consistency_mask, Decoder, InterleavedLayout, Modality, WordRule};
use crate::encoder::{Adapter, Encoder, SpeechEmbeddings};
use crate::error::Result;
use crate::losses::stage2_logit_equivalence;
use crate::model::Model;
use crate::tensor::weights::Initializer;
use crate::tensor::{Macs, Matrix, Real};

/// Small random model shape with block size from {4, 8, 12}.
pub fn random_config(rng: &mut impl Rng) -> ModelConfig {
    let enc_heads = *[1, 2, 4].choose(rng).unwrap();
    let dec_heads = *[1, 2, 4].choose(rng).unwrap();
    let d_enc = enc_heads * *[4, 8].choose(rng).unwrap();
    let d_model = dec_heads * *[4, 8].choose(rng).unwrap();
    ModelConfig {
        d_feat: *[8, 16].choose(rng).unwrap(),
        d_enc,
        enc_layers: rng.gen_range(1..=2),
        enc_heads,
        enc_ffn: 2 * d_enc,
        block_size: *[4, 8, 12].choose(rng).unwrap(),
        d_model,
        dec_layers: rng.gen_range(1..=2),
        dec_heads,
        dec_ffn: 2 * d_model,
        vocab_size: rng.gen_range(8..=24),
        ..ModelConfig::default()
    }
}

/// Alternating speech/text spans of random lengths, starting with speech.
pub fn random_layout(rng: &mut impl Rng, spans: usize, max_span: usize) -> InterleavedLayout {
    let mut layout = InterleavedLayout::default();
    for i in 0..spans {
        let modality = if i % 2 == 0 { Modality::Speech } else { Modality::Text };
        layout.push(modality, rng.gen_range(1..=max_span));
    }
    layout
}

/// Block-by-block encoding against one full pass over `segments` blocks.
pub fn encoder_deviation<T: Real>(cfg: &ModelConfig, segments: usize, seed: u64) -> Result<f64> {
    let mut init = Initializer::new(seed);
    let enc = Encoder::<T>::random(cfg, &mut init);
    let b = cfg.block_size;
    let frames: Matrix<T> = init.uniform(segments * b, cfg.d_feat, 1.0);
    let mut macs = Macs::default();
    let full = enc.encode_full(&frames, &mut macs)?;
    let mut cache = enc.new_cache();
    let mut inc = Matrix::zeros(0, enc.width());
    for s in 0..segments {
        inc.append_rows(&enc.encode_segment(&mut cache, &frames.slice_rows(s * b, (s + 1) * b), &mut macs)?)?;
    }
    Ok(full.max_abs_diff(&inc))
}

/// Adapter rows produced segment by segment against the full pass.
pub fn adapter_deviation<T: Real>(cfg: &ModelConfig, segments: usize, seed: u64) -> Result<f64> {
    let mut init = Initializer::new(seed);
    let adapter = Adapter::<T>::random(cfg, &mut init);
    let b = cfg.block_size;
    let states: Matrix<T> = init.uniform(segments * b, cfg.d_enc, 1.0);
    let mut macs = Macs::default();
    let full = adapter.adapt_full(&states, &mut macs)?;
    let mut inc = Matrix::zeros(0, cfg.d_model);
    for s in 1..=segments {
        inc.append_rows(&adapter.adapt(&states.slice_rows(0, s * b), inc.rows(), &mut macs)?)?;
    }
    Ok(full.max_abs_diff(&inc))
}

/// Logits of one masked full pass and of span-by-span cache appends.
pub fn decoder_logits<T: Real>(
    cfg: &ModelConfig,
    layout: &InterleavedLayout,
    seed: u64,
) -> Result<(Matrix<T>, Matrix<T>)> {
    let mut init = Initializer::new(seed);
    let dec = Decoder::<T>::random(cfg, &mut init);
    let emb: Matrix<T> = init.uniform(layout.len(), cfg.d_model, 1.0);
    let mut macs = Macs::default();
    let full = dec.forward_full(&emb, layout, &build_consistency_mask(layout), &mut macs)?;
    let mut cache = dec.new_cache();
    let mut inc = Matrix::zeros(0, dec.vocab_size());
    let mut at = 0;
    for &(modality, len) in layout.spans() {
        let out = dec.append(&mut cache, &emb.slice_rows(at, at + len), modality, &mut macs)?;
        inc.append_rows(&dec.logits(&out.hidden, &mut macs)?)?;
        at += len;
    }
    Ok((full, inc))
}

/// Largest logit difference between the two paths of [`decoder_logits`].
pub fn decoder_deviation<T: Real>(cfg: &ModelConfig, layout: &InterleavedLayout, seed: u64) -> Result<f64> {
    let (full, inc) = decoder_logits::<T>(cfg, layout, seed)?;
    Ok(full.max_abs_diff(&inc))
}

/// Teacher forcing under the training mask against wait-k decoding order.
pub fn stage2_deviation<T: Real>(cfg: &ModelConfig, segments: usize, k: usize, n: usize, seed: u64) -> Result<f64> {
    let model = Model::<T>::random(cfg.clone(), WordRule::EveryToken, seed)?;
    let mut init = Initializer::new(seed ^ 0x5eed);
    let per_segment = model.adapter.output_len(cfg.block_size).max(1);
    let mut speech = SpeechEmbeddings::new(cfg.d_model);
    for _ in 0..segments {
        speech.push_segment(&init.uniform(per_segment, cfg.d_model, 1.0))?;
    }
    let len = init.rng().gen_range(1..=2 * segments * n);
    let reference: Vec<u32> = (0..len).map(|_| init.rng().gen_range(3..cfg.vocab_size as u32)).collect();
    stage2_logit_equivalence(&model, &speech, &reference, k, n)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub max_deviation: f64,
}

/// Runs every suite in 32-bit precision with `trials` cases each.
pub fn run_equivalence(seed: u64, trials: usize) -> Result<Vec<SuiteResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = vec![
        SuiteResult { name: "encoder", cases: 0, max_deviation: 0.0 },
        SuiteResult { name: "adapter", cases: 0, max_deviation: 0.0 },
        SuiteResult { name: "decoder", cases: 0, max_deviation: 0.0 },
        SuiteResult { name: "stage2", cases: 0, max_deviation: 0.0 },
    ];
    for _ in 0..trials {
        let cfg = random_config(&mut rng);
        let segments = rng.gen_range(1..=8);
        let case_seed = rng.gen();
        let spans = rng.gen_range(1..=6);
        let layout = random_layout(&mut rng, spans, 5);
        let (k, n) = (*[1, 2, 3, 100].choose(&mut rng).unwrap(), rng.gen_range(1..=3));
        let devs = [
            encoder_deviation::<f32>(&cfg, segments, case_seed)?,
            adapter_deviation::<f32>(&cfg, segments, case_seed)?,
            decoder_deviation::<f32>(&cfg, &layout, case_seed)?,
            stage2_deviation::<f32>(&cfg, segments.clamp(2, 5), k, n, case_seed)?,
        ];
        for (r, d) in results.iter_mut().zip(devs) {
            r.cases += 1;
            r.max_deviation = r.max_deviation.max(d);
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_in_f64() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..4 {
            let cfg = random_config(&mut rng);
            assert!(encoder_deviation::<f64>(&cfg, 3, 1).unwrap() <= 1e-10);
            assert!(adapter_deviation::<f64>(&cfg, 3, 1).unwrap() <= 1e-10);
            let layout = random_layout(&mut rng, 5, 4);
            assert!(decoder_deviation::<f64>(&cfg, &layout, 1).unwrap() <= 1e-10);
            assert!(stage2_deviation::<f64>(&cfg, 3, 1, 2, 1).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn f32_report() {
        for r in run_equivalence(7, 3).unwrap() {
            assert_eq!(r.cases, 3);
            assert!(r.max_deviation <= 1e-5, "{r:?}");
        }
    }
}
