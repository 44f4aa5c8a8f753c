use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::tensor::{Macs, Matrix, Real};

use super::layout::Modality;
use super::model::{Decoder, DecoderCache};
use super::vocab::{TokenId, Vocabulary, WordTracker};

/// Bounds of one greedy generation call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenerateLimits {
    /// Stop after this many completed words; `None` runs to EOS.
    pub n_words: Option<usize>,
    pub max_tokens: usize,
    /// Never pick EOS (benchmarks that must run a fixed schedule).
    pub suppress_eos: bool,
}

impl GenerateLimits {
    pub const DEFAULT_MAX_TOKENS: usize = 64;

    pub fn words(n: usize) -> Self {
        Self {
            n_words: Some(n),
            max_tokens: Self::DEFAULT_MAX_TOKENS,
            suppress_eos: false,
        }
    }

    pub fn until_eos() -> Self {
        Self {
            n_words: None,
            max_tokens: Self::DEFAULT_MAX_TOKENS,
            suppress_eos: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Words,
    Eos,
    /// Token budget ran out first; the output is truncated.
    MaxTokens,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generation {
    pub tokens: Vec<TokenId>,
    pub words: usize,
    pub stop: StopReason,
}

impl Generation {
    pub fn truncated(&self) -> bool {
        self.stop == StopReason::MaxTokens
    }
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax<T: Real>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Greedy decoding from the current cache state.
///
/// Each step appends the previously emitted token (BOS at the very start of
/// the text stream) as a text row and picks the argmax of its logits. The
/// last emitted token stays pending in the cache and is appended at the
/// start of the next call, after any speech that arrives in between.
pub fn greedy_generate<T: Real>(
    decoder: &Decoder<T>,
    cache: &mut DecoderCache<T>,
    vocab: &Vocabulary,
    limits: &GenerateLimits,
    words: &mut WordTracker,
    macs: &mut Macs,
) -> Result<Generation> {
    if cache.speech_counter() == 0 {
        bail!(InvalidInput, "generation needs at least one speech row in the cache");
    }
    if limits.n_words == Some(0) {
        bail!(InvalidArgument, "n_words must be >= 1");
    }
    if vocab.size != decoder.vocab_size() {
        bail!(InvalidConfig, "vocabulary of {} vs decoder head of {}", vocab.size, decoder.vocab_size());
    }
    let mut tokens = Vec::new();
    let mut completed = 0;
    loop {
        if tokens.len() >= limits.max_tokens {
            return Ok(Generation {
                tokens,
                words: completed,
                stop: StopReason::MaxTokens,
            });
        }
        let input = match cache.pending {
            Some(t) => t,
            None if cache.text_counter() == 0 => vocab.bos,
            None => bail!(InvalidInput, "text stream has rows but no pending token"),
        };
        let emb = decoder.embed_tokens(&[input])?;
        let out = decoder.append(cache, &emb, Modality::Text, macs)?;
        let logits: Matrix<T> = decoder.logits(&out.hidden, macs)?;
        let mut row = logits.row(0).to_vec();
        if limits.suppress_eos {
            row[vocab.eos as usize] = T::neg_infinity();
        }
        let next = argmax(&row) as TokenId;
        tokens.push(next);
        cache.pending = Some(next);
        let closed = words.feed(next);
        completed += usize::from(closed);
        if next == vocab.eos {
            return Ok(Generation {
                tokens,
                words: completed,
                stop: StopReason::Eos,
            });
        }
        if limits.n_words.is_some_and(|n| completed >= n) {
            return Ok(Generation {
                tokens,
                words: completed,
                stop: StopReason::Words,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use crate::decoder::WordRule;
    use crate::tensor::weights::Initializer;
    use crate::tensor::Linear;

    fn fixed_output(token: usize, rule: WordRule) -> (Decoder<f64>, DecoderCache<f64>, Vocabulary) {
        let cfg = ModelConfig::default();
        let mut init = Initializer::new(4);
        let mut dec = Decoder::random(&cfg, &mut init);
        let mut bias = vec![0.0; cfg.vocab_size];
        bias[token] = 1.0;
        dec.lm_head = Linear::new(Matrix::zeros(cfg.d_model, cfg.vocab_size), Some(bias)).unwrap();
        let mut cache = dec.new_cache();
        let speech: Matrix<f64> = init.uniform(2, cfg.d_model, 1.0);
        dec.append(&mut cache, &speech, Modality::Speech, &mut Macs::default()).unwrap();
        (dec, cache, Vocabulary::new(cfg.vocab_size, rule).unwrap())
    }

    #[test]
    fn always_eos_stops_at_once() {
        let (dec, mut cache, vocab) = fixed_output(1, WordRule::Separator);
        let g = greedy_generate(&dec, &mut cache, &vocab, &GenerateLimits::words(3), &mut vocab.tracker(), &mut Macs::default()).unwrap();
        assert_eq!(g.tokens, vec![vocab.eos]);
        assert_eq!(g.stop, StopReason::Eos);
    }

    #[test]
    fn one_token_words() {
        let (dec, mut cache, vocab) = fixed_output(7, WordRule::EveryToken);
        let g = greedy_generate(&dec, &mut cache, &vocab, &GenerateLimits::words(3), &mut vocab.tracker(), &mut Macs::default()).unwrap();
        assert_eq!(g.tokens, vec![7, 7, 7]);
        assert_eq!(g.words, 3);
        // BOS plus the first two emitted tokens were appended; the third is pending
        assert_eq!(cache.text_counter(), 3);
        assert_eq!(cache.pending(), Some(7));
    }

    #[test]
    fn truncated_without_boundary() {
        let (dec, mut cache, vocab) = fixed_output(9, WordRule::Separator);
        let limits = GenerateLimits {
            max_tokens: 5,
            ..GenerateLimits::words(1)
        };
        let g = greedy_generate(&dec, &mut cache, &vocab, &limits, &mut vocab.tracker(), &mut Macs::default()).unwrap();
        assert_eq!(g.tokens.len(), 5);
        assert!(g.truncated());
    }

    #[test]
    fn ties_pick_lowest_id() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0f32; 4]), 0);
    }

    #[test]
    fn needs_speech_first() {
        let cfg = ModelConfig::default();
        let dec = Decoder::<f64>::random(&cfg, &mut Initializer::new(1));
        let vocab = Vocabulary::new(cfg.vocab_size, WordRule::Separator).unwrap();
        let mut cache = dec.new_cache();
        assert!(greedy_generate(&dec, &mut cache, &vocab, &GenerateLimits::words(1), &mut vocab.tracker(), &mut Macs::default()).is_err());
    }
}
