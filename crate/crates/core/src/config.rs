use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

/// Kernel width and stride of one causal convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub kernel: usize,
    pub stride: usize,
}

/// Every dimension and hyperparameter of the toy model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Convolutions of the waveform front-end, applied in order.
    pub extractor: Vec<ConvSpec>,
    pub d_feat: usize,
    pub d_enc: usize,
    pub enc_layers: usize,
    pub enc_heads: usize,
    pub enc_ffn: usize,
    /// Encoder frames per speech segment.
    pub block_size: usize,
    /// The two length-reducing convolutions of the adapter.
    pub adapter: [ConvSpec; 2],
    pub d_model: usize,
    pub dec_layers: usize,
    pub dec_heads: usize,
    pub dec_ffn: usize,
    pub vocab_size: usize,
    pub max_position: usize,
    pub rope_base: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            extractor: vec![
                ConvSpec {
                    kernel: 8,
                    stride: 4,
                },
                ConvSpec {
                    kernel: 4,
                    stride: 4,
                },
            ],
            d_feat: 32,
            d_enc: 64,
            enc_layers: 2,
            enc_heads: 4,
            enc_ffn: 256,
            block_size: 8,
            adapter: [ConvSpec {
                kernel: 3,
                stride: 2,
            }; 2],
            d_model: 64,
            dec_layers: 2,
            dec_heads: 4,
            dec_ffn: 256,
            vocab_size: 32,
            max_position: 4096,
            rope_base: 10_000.0,
        }
    }
}

impl ModelConfig {
    /// Combined stride of the waveform front-end.
    pub fn extractor_stride(&self) -> usize {
        self.extractor.iter().map(|c| c.stride).product()
    }

    /// Waveform samples per segment.
    pub fn segment_samples(&self) -> usize {
        self.block_size * self.extractor_stride()
    }

    pub fn adapter_stride(&self) -> usize {
        self.adapter[0].stride * self.adapter[1].stride
    }

    pub fn validate(&self) -> Result<()> {
        if self.extractor.is_empty() {
            bail!(InvalidConfig, "feature extractor needs at least one convolution");
        }
        for c in self.extractor.iter().chain(&self.adapter) {
            if c.kernel == 0 || c.stride == 0 {
                bail!(InvalidConfig, "convolution kernel and stride must be >= 1");
            }
        }
        if self.block_size == 0 {
            bail!(InvalidConfig, "block size must be >= 1");
        }
        for (name, d, h) in [
            ("encoder", self.d_enc, self.enc_heads),
            ("decoder", self.d_model, self.dec_heads),
        ] {
            if h == 0 || d % h != 0 {
                bail!(InvalidConfig, "{name} width {d} does not split into {h} heads");
            }
        }
        if (self.d_model / self.dec_heads) % 2 != 0 {
            bail!(InvalidConfig, "decoder head dim must be even for rotary embedding");
        }
        if [self.d_feat, self.d_enc, self.enc_ffn, self.d_model, self.dec_ffn]
            .contains(&0)
        {
            bail!(InvalidConfig, "zero-width layer");
        }
        if self.vocab_size < 4 {
            bail!(InvalidConfig, "vocabulary needs at least 4 tokens");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_toy_sized() {
        let cfg = ModelConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.extractor_stride(), 16);
        assert_eq!(cfg.segment_samples(), 128);
        assert_eq!(cfg.adapter_stride(), 4);
    }

    #[test]
    fn odd_head_dim_rejected() {
        let cfg = ModelConfig {
            d_model: 12,
            dec_heads: 4,
            ..ModelConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
