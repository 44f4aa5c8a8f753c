use crate::config::ModelConfig;
use crate::error::{bail, Result};
use crate::tensor::weights::{Initializer, WeightStore};
use crate::tensor::block::{load_linear, load_norm, store_linear, store_norm};
use crate::tensor::{attend_heads, AttentionMask, LayerNorm, Linear, Macs, Matrix, Real, TransformerLayer};

/// Query `jq` may attend key `jk` iff `jq / b >= jk / b`.
pub fn build_blockwise_mask(len: usize, block: usize) -> AttentionMask {
    let b = block.max(1);
    AttentionMask::from_fn(len, len, |q, k| q / b >= k / b)
}

/// Block-level key/value cache of the speech encoder. Append-only.
#[derive(Clone, Debug)]
pub struct EncoderCache<T = f32> {
    keys: Vec<Matrix<T>>,
    values: Vec<Matrix<T>>,
    blocks_processed: usize,
    block_size: usize,
}

impl<T: Real> EncoderCache<T> {
    pub fn new(layers: usize, width: usize, block_size: usize) -> Self {
        Self {
            keys: vec![Matrix::zeros(0, width); layers],
            values: vec![Matrix::zeros(0, width); layers],
            blocks_processed: 0,
            block_size,
        }
    }

    pub fn blocks_processed(&self) -> usize {
        self.blocks_processed
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn layers(&self) -> usize {
        self.keys.len()
    }

    /// Cached key rows of `layer`.
    pub fn keys(&self, layer: usize) -> &Matrix<T> {
        &self.keys[layer]
    }

    pub fn values(&self, layer: usize) -> &Matrix<T> {
        &self.values[layer]
    }
}

/// Blockwise-causal transformer encoder.
#[derive(Clone, Debug)]
pub struct Encoder<T = f32> {
    pub input: Linear<T>,
    pub layers: Vec<TransformerLayer<T>>,
    pub final_norm: LayerNorm<T>,
    pub heads: usize,
    pub block_size: usize,
}

impl<T: Real> Encoder<T> {
    pub fn random(cfg: &ModelConfig, init: &mut Initializer) -> Self {
        let input = Linear::new(init.weight(cfg.d_feat, cfg.d_enc, 1.0), Some(init.vector(cfg.d_enc, 0.02))).unwrap();
        let layers = (0..cfg.enc_layers)
            .map(|_| TransformerLayer::random(init, cfg.d_enc, cfg.enc_ffn))
            .collect();
        Self {
            input,
            layers,
            final_norm: LayerNorm::new(vec![T::one(); cfg.d_enc], vec![T::zero(); cfg.d_enc]).unwrap(),
            heads: cfg.enc_heads,
            block_size: cfg.block_size,
        }
    }

    pub fn width(&self) -> usize {
        self.input.out_dim()
    }

    pub fn new_cache(&self) -> EncoderCache<T> {
        EncoderCache::new(self.layers.len(), self.width(), self.block_size)
    }

    /// Reference path: all frames at once under the blockwise-causal mask.
    pub fn encode_full(&self, frames: &Matrix<T>, macs: &mut Macs) -> Result<Matrix<T>> {
        let b = self.block_size;
        if frames.rows() == 0 || frames.rows() % b != 0 {
            bail!(
                InvalidLength,
                "{} frames is not a positive multiple of block size {b}",
                frames.rows()
            );
        }
        let mut x = self.input.forward(frames, macs)?;
        for layer in &self.layers {
            let (q, k, v) = layer.qkv(&x, macs)?;
            let attn = attend_heads(&q, &k, &v, self.heads, |i, j| i / b >= j / b, macs)?;
            x = layer.finish(&x, &attn, macs)?;
        }
        self.final_norm.forward(&x)
    }

    /// Encodes one new block against the cache and appends its keys/values.
    pub fn encode_segment(
        &self,
        cache: &mut EncoderCache<T>,
        block: &Matrix<T>,
        macs: &mut Macs,
    ) -> Result<Matrix<T>> {
        if block.rows() != self.block_size {
            bail!(
                InvalidBlock,
                "block has {} rows, expected {}",
                block.rows(),
                self.block_size
            );
        }
        if cache.block_size != self.block_size || cache.layers() != self.layers.len() {
            bail!(InvalidConfig, "cache does not belong to this encoder");
        }
        let mut x = self.input.forward(block, macs)?;
        for (l, layer) in self.layers.iter().enumerate() {
            let (q, k, v) = layer.qkv(&x, macs)?;
            cache.keys[l].append_rows(&k)?;
            cache.values[l].append_rows(&v)?;
            let attn = attend_heads(&q, &cache.keys[l], &cache.values[l], self.heads, |_, _| true, macs)?;
            x = layer.finish(&x, &attn, macs)?;
        }
        cache.blocks_processed += 1;
        self.final_norm.forward(&x)
    }

    pub fn store(&self, p: &str, s: &mut WeightStore) {
        store_linear(&self.input, &format!("{p}.input"), s);
        for (i, l) in self.layers.iter().enumerate() {
            l.store(&format!("{p}.layer{i}"), s);
        }
        store_norm(&self.final_norm, &format!("{p}.final_norm"), s);
    }

    pub fn load(s: &WeightStore, p: &str, cfg: &ModelConfig) -> Result<Self> {
        Ok(Self {
            input: load_linear(s, &format!("{p}.input"))?,
            layers: (0..cfg.enc_layers)
                .map(|i| TransformerLayer::load(s, &format!("{p}.layer{i}")))
                .collect::<Result<_>>()?,
            final_norm: load_norm(s, &format!("{p}.final_norm"))?,
            heads: cfg.enc_heads,
            block_size: cfg.block_size,
        })
    }
}
