use crate::config::ModelConfig;
use crate::error::{bail, Result};
use crate::tensor::block::{load_linear, load_norm, store_linear, store_norm};
use crate::tensor::weights::{Initializer, WeightStore};
use crate::tensor::{
    attend_heads, AttentionMask, LayerNorm, Linear, Macs, Matrix, Real, RotaryTable,
    TransformerLayer,
};

use super::layout::{assign_positions, InterleavedLayout, Modality};
use super::vocab::TokenId;

/// Per-layer key/value rows of the decoder plus the modality flag and
/// position index of every cached row.
#[derive(Clone, Debug)]
pub struct DecoderCache<T = f32> {
    keys: Vec<Matrix<T>>,
    values: Vec<Matrix<T>>,
    modality: Vec<Modality>,
    positions: Vec<usize>,
    speech_counter: usize,
    text_counter: usize,
    /// Last emitted token whose row has not been appended yet.
    pub(crate) pending: Option<TokenId>,
}

/// Restore point for [`DecoderCache::rollback`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CacheMark {
    len: usize,
    pending: Option<TokenId>,
}

impl CacheMark {
    /// Cache length when the mark was taken.
    pub fn rows(&self) -> usize {
        self.len
    }
}

impl<T: Real> DecoderCache<T> {
    pub fn new(layers: usize, width: usize) -> Self {
        Self {
            keys: vec![Matrix::zeros(0, width); layers],
            values: vec![Matrix::zeros(0, width); layers],
            modality: Vec::new(),
            positions: Vec::new(),
            speech_counter: 0,
            text_counter: 0,
            pending: None,
        }
    }

    pub fn len(&self) -> usize {
        self.modality.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modality.is_empty()
    }

    pub fn speech_counter(&self) -> usize {
        self.speech_counter
    }

    pub fn text_counter(&self) -> usize {
        self.text_counter
    }

    pub fn modalities(&self) -> &[Modality] {
        &self.modality
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn keys(&self, layer: usize) -> &Matrix<T> {
        &self.keys[layer]
    }

    pub fn pending(&self) -> Option<TokenId> {
        self.pending
    }

    pub fn mark(&self) -> CacheMark {
        CacheMark {
            len: self.len(),
            pending: self.pending,
        }
    }

    /// Drops every row appended after `mark` and restores its pending token.
    pub fn rollback(&mut self, mark: CacheMark) {
        self.truncate(mark.len);
        self.pending = mark.pending;
    }

    /// Keeps the first `len` rows, rewinding both position counters.
    pub fn truncate(&mut self, len: usize) {
        if len >= self.len() {
            return;
        }
        for m in &self.modality[len..] {
            match m {
                Modality::Speech => self.speech_counter -= 1,
                Modality::Text => self.text_counter -= 1,
            }
        }
        self.modality.truncate(len);
        self.positions.truncate(len);
        for k in &mut self.keys {
            k.truncate_rows(len);
        }
        for v in &mut self.values {
            v.truncate_rows(len);
        }
    }

    /// Reserves position indices for `n` new rows of one modality.
    fn next_positions(&self, modality: Modality, n: usize) -> Vec<usize> {
        let start = match modality {
            Modality::Speech => self.speech_counter,
            Modality::Text => self.text_counter,
        };
        (start..start + n).collect()
    }

    fn commit_rows(&mut self, modality: Modality, positions: &[usize]) {
        self.modality.extend(std::iter::repeat(modality).take(positions.len()));
        self.positions.extend_from_slice(positions);
        match modality {
            Modality::Speech => self.speech_counter += positions.len(),
            Modality::Text => self.text_counter += positions.len(),
        }
    }
}

/// Decoder-only transformer with rotary positions and an untied output head.
#[derive(Clone, Debug)]
pub struct Decoder<T = f32> {
    pub embed: Matrix<T>,
    pub layers: Vec<TransformerLayer<T>>,
    pub final_norm: LayerNorm<T>,
    pub lm_head: Linear<T>,
    pub heads: usize,
    pub rope: RotaryTable<T>,
}

/// Hidden states produced by one decoder call.
#[derive(Clone, Debug)]
pub struct DecoderOutput<T = f32> {
    /// Final-norm output, one row per input row.
    pub hidden: Matrix<T>,
}

impl<T: Real> Decoder<T> {
    pub fn random(cfg: &ModelConfig, init: &mut Initializer) -> Self {
        let d = cfg.d_model;
        Self {
            embed: init.uniform(cfg.vocab_size, d, 1.0),
            layers: (0..cfg.dec_layers)
                .map(|_| TransformerLayer::random(init, d, cfg.dec_ffn))
                .collect(),
            final_norm: LayerNorm::new(vec![T::one(); d], vec![T::zero(); d]).unwrap(),
            lm_head: Linear::new(init.weight(d, cfg.vocab_size, 1.0), Some(vec![T::zero(); cfg.vocab_size])).unwrap(),
            heads: cfg.dec_heads,
            rope: RotaryTable::new(cfg.max_position, d / cfg.dec_heads, cfg.rope_base)
                .expect("validated config"),
        }
    }

    pub fn width(&self) -> usize {
        self.embed.cols()
    }

    pub fn vocab_size(&self) -> usize {
        self.embed.rows()
    }

    pub fn new_cache(&self) -> DecoderCache<T> {
        DecoderCache::new(self.layers.len(), self.width())
    }

    /// Token embedding rows.
    pub fn embed_tokens(&self, tokens: &[TokenId]) -> Result<Matrix<T>> {
        let mut out = Matrix::zeros(tokens.len(), self.width());
        for (r, &t) in tokens.iter().enumerate() {
            if t as usize >= self.vocab_size() {
                bail!(InvalidTarget, "token {t} outside vocabulary of {}", self.vocab_size());
            }
            out.row_mut(r).copy_from_slice(self.embed.row(t as usize));
        }
        Ok(out)
    }

    /// Vocabulary logits for hidden rows.
    pub fn logits(&self, hidden: &Matrix<T>, macs: &mut Macs) -> Result<Matrix<T>> {
        self.lm_head.forward(hidden, macs)
    }

    /// Reference path: every row of `layout` at once under `mask`, with
    /// positions from [`assign_positions`]. Returns final hidden states.
    pub fn forward_full_hidden(
        &self,
        embeddings: &Matrix<T>,
        layout: &InterleavedLayout,
        mask: &AttentionMask,
        macs: &mut Macs,
    ) -> Result<Matrix<T>> {
        let n = layout.len();
        if embeddings.rows() != n || embeddings.cols() != self.width() {
            bail!(
                InvalidArgument,
                "embeddings {}x{} do not match layout length {n} and width {}",
                embeddings.rows(),
                embeddings.cols(),
                self.width()
            );
        }
        if mask.rows() != n || mask.cols() != n {
            bail!(InvalidArgument, "mask {}x{} does not match layout length {n}", mask.rows(), mask.cols());
        }
        let positions = assign_positions(layout);
        let mut x = embeddings.clone();
        for layer in &self.layers {
            let (mut q, mut k, v) = layer.qkv(&x, macs)?;
            self.rope.apply_heads(&mut q, &positions)?;
            self.rope.apply_heads(&mut k, &positions)?;
            let attn = attend_heads(&q, &k, &v, self.heads, |i, j| mask.allowed(i, j), macs)?;
            x = layer.finish(&x, &attn, macs)?;
        }
        self.final_norm.forward(&x)
    }

    /// Logits at every position of the full forward pass.
    pub fn forward_full(
        &self,
        embeddings: &Matrix<T>,
        layout: &InterleavedLayout,
        mask: &AttentionMask,
        macs: &mut Macs,
    ) -> Result<Matrix<T>> {
        let hidden = self.forward_full_hidden(embeddings, layout, mask, macs)?;
        self.logits(&hidden, macs)
    }

    /// Appends rows of one modality to the cache and returns their hidden
    /// states. Only the new rows are projected; they attend the cached rows
    /// and each other under the consistency rule.
    pub fn append(
        &self,
        cache: &mut DecoderCache<T>,
        embeddings: &Matrix<T>,
        modality: Modality,
        macs: &mut Macs,
    ) -> Result<DecoderOutput<T>> {
        if embeddings.cols() != self.width() {
            bail!(
                InvalidArgument,
                "embedding width {} != decoder width {}",
                embeddings.cols(),
                self.width()
            );
        }
        if cache.keys.len() != self.layers.len() {
            bail!(InvalidConfig, "cache does not belong to this decoder");
        }
        let n = embeddings.rows();
        let base = cache.len();
        let positions = cache.next_positions(modality, n);
        match self.append_layers(cache, embeddings, modality, &positions, macs) {
            Ok(hidden) => {
                cache.commit_rows(modality, &positions);
                Ok(DecoderOutput { hidden })
            }
            Err(e) => {
                for (k, v) in cache.keys.iter_mut().zip(&mut cache.values) {
                    k.truncate_rows(base);
                    v.truncate_rows(base);
                }
                Err(e)
            }
        }
    }

    fn append_layers(
        &self,
        cache: &mut DecoderCache<T>,
        embeddings: &Matrix<T>,
        modality: Modality,
        positions: &[usize],
        macs: &mut Macs,
    ) -> Result<Matrix<T>> {
        let base = cache.len();
        let DecoderCache {
            keys,
            values,
            modality: flags,
            ..
        } = cache;
        let speech_query = modality == Modality::Speech;
        let allowed = |i: usize, j: usize| {
            j <= base + i && (!speech_query || j >= base || flags[j] == Modality::Speech)
        };
        let mut x = embeddings.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let (mut q, mut k, v) = layer.qkv(&x, macs)?;
            self.rope.apply_heads(&mut q, positions)?;
            self.rope.apply_heads(&mut k, positions)?;
            keys[l].append_rows(&k)?;
            values[l].append_rows(&v)?;
            let attn = attend_heads(&q, &keys[l], &values[l], self.heads, allowed, macs)?;
            x = layer.finish(&x, &attn, macs)?;
        }
        self.final_norm.forward(&x)
    }

    pub fn store(&self, p: &str, s: &mut WeightStore) {
        s.insert_matrix(&format!("{p}.embed"), &self.embed);
        for (i, l) in self.layers.iter().enumerate() {
            l.store(&format!("{p}.layer{i}"), s);
        }
        store_norm(&self.final_norm, &format!("{p}.final_norm"), s);
        store_linear(&self.lm_head, &format!("{p}.lm_head"), s);
    }

    pub fn load(s: &WeightStore, p: &str, cfg: &ModelConfig) -> Result<Self> {
        Ok(Self {
            embed: s.matrix(&format!("{p}.embed"))?,
            layers: (0..cfg.dec_layers)
                .map(|i| TransformerLayer::load(s, &format!("{p}.layer{i}")))
                .collect::<Result<_>>()?,
            final_norm: load_norm(s, &format!("{p}.final_norm"))?,
            lm_head: load_linear(s, &format!("{p}.lm_head"))?,
            heads: cfg.dec_heads,
            rope: RotaryTable::new(cfg.max_position, cfg.d_model / cfg.dec_heads, cfg.rope_base)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::build_consistency_mask;
    use Modality::{Speech as S, Text as T};

    fn toy(seed: u64) -> (Decoder<f64>, Initializer) {
        let mut init = Initializer::new(seed);
        (Decoder::random(&ModelConfig::default(), &mut init), init)
    }

    #[test]
    fn single_text_token_logit_shape() {
        let (dec, _) = toy(1);
        let layout = InterleavedLayout::new(vec![(T, 1)]).unwrap();
        let emb = dec.embed_tokens(&[0]).unwrap();
        let logits = dec
            .forward_full(&emb, &layout, &build_consistency_mask(&layout), &mut Macs::default())
            .unwrap();
        assert_eq!(logits.shape(), (1, 32));
    }

    #[test]
    fn replay_matches_full_and_counters() {
        let (dec, mut init) = toy(2);
        let layout = InterleavedLayout::new(vec![(S, 3), (T, 2), (S, 3)]).unwrap();
        let emb: Matrix<f64> = init.uniform(8, 64, 1.0);
        let full = dec
            .forward_full_hidden(&emb, &layout, &build_consistency_mask(&layout), &mut Macs::default())
            .unwrap();
        let mut cache = dec.new_cache();
        let mut start = 0;
        let mut parts = Vec::new();
        for &(m, n) in layout.spans() {
            parts.push(dec.append(&mut cache, &emb.slice_rows(start, start + n), m, &mut Macs::default()).unwrap().hidden);
            start += n;
        }
        assert!(Matrix::vstack(&parts).unwrap().max_abs_diff(&full) <= 1e-10);
        assert_eq!(cache.speech_counter(), 6);
        assert_eq!(cache.text_counter(), 2);
        assert_eq!(cache.positions(), &[0, 1, 2, 0, 1, 3, 4, 5]);
    }

    #[test]
    fn truncate_rewinds_counters() {
        let (dec, mut init) = toy(3);
        let mut cache = dec.new_cache();
        dec.append(&mut cache, &init.uniform(2, 64, 1.0), S, &mut Macs::default()).unwrap();
        let mark = cache.mark();
        dec.append(&mut cache, &init.uniform(3, 64, 1.0), T, &mut Macs::default()).unwrap();
        cache.rollback(mark);
        assert_eq!((cache.len(), cache.text_counter(), cache.speech_counter()), (2, 0, 2));
        assert_eq!(cache.keys(1).rows(), 2);
    }
}
