//! The assembled speech-to-text model and its weight file form.

use std::path::Path;

use crate::config::ModelConfig;
use crate::decoder::{Decoder, TokenId, Vocabulary, WordRule};
use crate::encoder::{Adapter, Encoder, FeatureExtractor};
use crate::error::{bail, Result};
use crate::tensor::weights::{Initializer, WeightStore};
use crate::tensor::{Linear, Matrix, Real};

/// Front-end, encoder, adapter and decoder with their shared configuration.
#[derive(Clone, Debug)]
pub struct Model<T = f32> {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub features: FeatureExtractor<T>,
    pub encoder: Encoder<T>,
    pub adapter: Adapter<T>,
    pub decoder: Decoder<T>,
}

impl<T: Real> Model<T> {
    /// Toy weights from the seeded initializer.
    pub fn random(config: ModelConfig, word_rule: WordRule, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut init = Initializer::new(seed);
        let vocab = Vocabulary::new(config.vocab_size, word_rule)?;
        Ok(Self {
            features: FeatureExtractor::random(&config, &mut init),
            encoder: Encoder::random(&config, &mut init),
            adapter: Adapter::random(&config, &mut init),
            decoder: Decoder::random(&config, &mut init),
            config,
            vocab,
        })
    }

    pub fn to_store(&self) -> WeightStore {
        let mut s = WeightStore::new();
        self.features.store("features", &mut s);
        self.encoder.store("encoder", &mut s);
        self.adapter.store("adapter", &mut s);
        self.decoder.store("decoder", &mut s);
        s
    }

    pub fn from_store(config: ModelConfig, vocab: Vocabulary, store: &WeightStore) -> Result<Self> {
        config.validate()?;
        vocab.validate()?;
        if vocab.size != config.vocab_size {
            bail!(InvalidConfig, "vocabulary size {} != model vocabulary {}", vocab.size, config.vocab_size);
        }
        let model = Self {
            features: FeatureExtractor::load(store, "features", &config)?,
            encoder: Encoder::load(store, "encoder", &config)?,
            adapter: Adapter::load(store, "adapter", &config)?,
            decoder: Decoder::load(store, "decoder", &config)?,
            config,
            vocab,
        };
        model.check_shapes()?;
        Ok(model)
    }

    pub fn load(config: ModelConfig, vocab: Vocabulary, blob: &Path, manifest: &Path) -> Result<Self> {
        Self::from_store(config, vocab, &WeightStore::load(blob, manifest)?)
    }

    pub fn save(&self, blob: &Path, manifest: &Path) -> Result<()> {
        self.to_store().save(blob, manifest)
    }

    /// Replaces the output head so that every generation step picks `token`.
    pub fn pin_output(&mut self, token: TokenId) -> Result<()> {
        self.vocab.check(token)?;
        let mut bias = vec![T::zero(); self.config.vocab_size];
        bias[token as usize] = T::one();
        self.decoder.lm_head = Linear::new(Matrix::zeros(self.config.d_model, self.config.vocab_size), Some(bias))?;
        Ok(())
    }

    /// Cross-checks loaded tensor shapes against the configuration.
    pub fn check_shapes(&self) -> Result<()> {
        let c = &self.config;
        if self.features.d_feat() != c.d_feat || self.features.total_stride() != c.extractor_stride() {
            bail!(InvalidConfig, "feature extractor does not match config");
        }
        if self.encoder.input.in_dim() != c.d_feat || self.encoder.width() != c.d_enc {
            bail!(InvalidConfig, "encoder widths do not match config");
        }
        if self.adapter.conv1.in_dim() != c.d_enc || self.adapter.proj.out_dim() != c.d_model {
            bail!(InvalidConfig, "adapter widths do not match config");
        }
        if self.decoder.width() != c.d_model || self.decoder.vocab_size() != c.vocab_size {
            bail!(InvalidConfig, "decoder widths do not match config");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let model = Model::<f32>::random(ModelConfig::default(), WordRule::Separator, 3).unwrap();
        let (blob, manifest) = (dir.path().join("w.bin"), dir.path().join("w.json"));
        model.save(&blob, &manifest).unwrap();
        let back = Model::<f32>::load(model.config.clone(), model.vocab.clone(), &blob, &manifest).unwrap();
        assert_eq!(back.to_store(), model.to_store());
        let wrong = ModelConfig {
            d_enc: 32,
            ..ModelConfig::default()
        };
        assert!(Model::<f32>::load(wrong, model.vocab.clone(), &blob, &manifest).is_err());
    }
}
