use crate::decoder::{
    greedy_generate, CacheMark, DecoderCache, GenerateLimits, Generation, Modality, TokenId,
    Vocabulary, WordTracker,
};
use crate::encoder::{EncoderCache, FeatureStream, SpeechEmbeddings, WaveformSegment};
use crate::error::{bail, Result};
use crate::model::Model;
use crate::tensor::{Macs, Matrix, Real};

use super::clock::{OpKind, Work};

/// What a policy needs from a translation backend.
pub trait SimulEngine {
    type Scalar: Real;

    fn vocab(&self) -> &Vocabulary;

    /// Consumes one segment and makes its speech visible to the decoder.
    fn read(&mut self, segment: &WaveformSegment<Self::Scalar>) -> Result<Work>;

    /// Greedy continuation of the current text prefix.
    fn generate(&mut self, limits: &GenerateLimits) -> Result<(Generation, Work)>;

    /// Keeps the first `keep` tokens of the last generation and forgets the
    /// rest, as if they had never been produced.
    fn retain(&mut self, keep: usize) -> Result<()>;
}

/// How much of the model is recomputed per read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Front-end, encoder, adapter and decoder all rerun over the whole stream.
    FullRecompute,
    /// Incremental front-end and encoder; the decoder cache is rebuilt.
    IncrementalEncoderOnly,
    /// Everything incremental.
    FullIncremental,
}

impl Variant {
    pub const ALL: [Variant; 3] = [
        Variant::FullRecompute,
        Variant::IncrementalEncoderOnly,
        Variant::FullIncremental,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::FullRecompute => "full_recompute",
            Variant::IncrementalEncoderOnly => "incremental_encoder_only",
            Variant::FullIncremental => "full_incremental",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match Self::ALL.into_iter().find(|v| v.name() == name) {
            Some(v) => Ok(v),
            None => bail!(InvalidConfig, "unknown variant '{name}'"),
        }
    }
}

struct LastGeneration {
    mark: CacheMark,
    tracker: WordTracker,
    tokens: Vec<TokenId>,
}

/// Model-backed engine holding every cache of one session.
pub struct IncrementalEngine<'m, T: Real> {
    model: &'m Model<T>,
    variant: Variant,
    features: FeatureStream<T>,
    samples: Vec<T>,
    enc_cache: EncoderCache<T>,
    states: Matrix<T>,
    speech: SpeechEmbeddings<T>,
    cache: DecoderCache<T>,
    /// Token fed at every text row of `cache`, in order.
    text_inputs: Vec<TokenId>,
    tracker: WordTracker,
    last: Option<LastGeneration>,
}

impl<'m, T: Real> IncrementalEngine<'m, T> {
    pub fn new(model: &'m Model<T>) -> Result<Self> {
        Self::with_variant(model, Variant::FullIncremental)
    }

    pub fn with_variant(model: &'m Model<T>, variant: Variant) -> Result<Self> {
        model.check_shapes()?;
        Ok(Self {
            model,
            variant,
            features: FeatureStream::new(),
            samples: Vec::new(),
            enc_cache: model.encoder.new_cache(),
            states: Matrix::zeros(0, model.encoder.width()),
            speech: SpeechEmbeddings::new(model.decoder.width()),
            cache: model.decoder.new_cache(),
            text_inputs: Vec::new(),
            tracker: model.vocab.tracker(),
            last: None,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn encoder_states(&self) -> &Matrix<T> {
        &self.states
    }

    pub fn speech_embeddings(&self) -> &SpeechEmbeddings<T> {
        &self.speech
    }

    pub fn decoder_cache(&self) -> &DecoderCache<T> {
        &self.cache
    }

    /// Encoder states for the new segment, plus the adapter rows they unlock.
    fn encode(&mut self, segment: &WaveformSegment<T>, work: &mut Work) -> Result<Matrix<T>> {
        let m = self.model;
        let b = m.config.block_size;
        let mut macs = Macs::default();
        if self.variant == Variant::FullRecompute {
            let expected = m.config.segment_samples();
            if segment.samples().len() != expected {
                bail!(InvalidSegment, "segment has {} samples, expected {expected}", segment.samples().len());
            }
            self.samples.extend_from_slice(segment.samples());
            let frames = m.features.extract(&self.samples, &mut macs)?;
            work.add(OpKind::Extract, std::mem::take(&mut macs).0);
            self.states = m.encoder.encode_full(&frames, &mut macs)?;
            work.add(OpKind::Encode, std::mem::take(&mut macs).0);
            let all = m.adapter.adapt_full(&self.states, &mut macs)?;
            work.add(OpKind::Adapt, macs.0);
            return Ok(all.slice_rows(self.speech.len(), all.rows()));
        }
        let frames = self.features.push(&m.features, segment, b, &mut macs)?;
        work.add(OpKind::Extract, std::mem::take(&mut macs).0);
        let block = m.encoder.encode_segment(&mut self.enc_cache, &frames, &mut macs)?;
        work.add(OpKind::Encode, std::mem::take(&mut macs).0);
        self.states.append_rows(&block)?;
        let fresh = m.adapter.adapt(&self.states, self.speech.len(), &mut macs)?;
        work.add(OpKind::Adapt, macs.0);
        Ok(fresh)
    }

    /// Replays every cached row into a fresh decoder cache.
    fn rebuild_decoder(&mut self, macs: &mut Macs) -> Result<()> {
        let dec = &self.model.decoder;
        let mut fresh = dec.new_cache();
        let flags = self.cache.modalities();
        let (mut speech_at, mut text_at) = (0, 0);
        let mut i = 0;
        while i < flags.len() {
            let modality = flags[i];
            let run = flags[i..].iter().take_while(|&&f| f == modality).count();
            let emb = match modality {
                Modality::Speech => {
                    speech_at += run;
                    self.speech.matrix().slice_rows(speech_at - run, speech_at)
                }
                Modality::Text => {
                    text_at += run;
                    dec.embed_tokens(&self.text_inputs[text_at - run..text_at])?
                }
            };
            dec.append(&mut fresh, &emb, modality, macs)?;
            i += run;
        }
        fresh.pending = self.cache.pending;
        self.cache = fresh;
        Ok(())
    }
}

impl<T: Real> SimulEngine for IncrementalEngine<'_, T> {
    type Scalar = T;

    fn vocab(&self) -> &Vocabulary {
        &self.model.vocab
    }

    fn read(&mut self, segment: &WaveformSegment<T>) -> Result<Work> {
        let mut work = Work::default();
        let fresh = self.encode(segment, &mut work)?;
        self.speech.push_segment(&fresh)?;
        self.last = None;
        let mut macs = Macs::default();
        if self.variant != Variant::FullIncremental {
            self.rebuild_decoder(&mut macs)?;
        }
        if fresh.rows() > 0 {
            self.model.decoder.append(&mut self.cache, &fresh, Modality::Speech, &mut macs)?;
        }
        work.add(OpKind::Prefill, macs.0);
        Ok(work)
    }

    fn generate(&mut self, limits: &GenerateLimits) -> Result<(Generation, Work)> {
        let m = self.model;
        let mark = self.cache.mark();
        let tracker = self.tracker.clone();
        let first = match self.cache.pending() {
            Some(t) => t,
            None => m.vocab.bos,
        };
        let mut macs = Macs::default();
        let gen = greedy_generate(&m.decoder, &mut self.cache, &m.vocab, limits, &mut self.tracker, &mut macs)?;
        if let Some((_, head)) = gen.tokens.split_last() {
            self.text_inputs.push(first);
            self.text_inputs.extend_from_slice(head);
        }
        self.last = Some(LastGeneration {
            mark,
            tracker,
            tokens: gen.tokens.clone(),
        });
        let mut work = Work::default();
        work.add(OpKind::Generate, macs.0);
        Ok((gen, work))
    }

    fn retain(&mut self, keep: usize) -> Result<()> {
        let Some(last) = self.last.take() else {
            bail!(InvalidArgument, "nothing generated since the last read");
        };
        let m = last.tokens.len();
        if keep > m {
            bail!(InvalidArgument, "cannot keep {keep} of {m} generated tokens");
        }
        if keep < m {
            if keep == 0 {
                self.cache.rollback(last.mark);
            } else {
                // Rows were appended for [first, t1 .. t(m-1)]; keeping `keep`
                // tokens keeps `keep` rows with t(keep) pending.
                self.cache.truncate(last.mark.rows() + keep);
                self.cache.pending = Some(last.tokens[keep - 1]);
            }
            self.text_inputs.truncate(self.cache.text_counter());
            self.tracker = last.tracker;
            for &t in &last.tokens[..keep] {
                self.tracker.feed(t);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::config::ModelConfig;
    use crate::decoder::WordRule;
    use crate::streaming::{run_policy, Clock, CostTable, PolicyConfig, SessionOutput};

    fn stream(cfg: &ModelConfig, n: usize, seed: u64) -> Vec<WaveformSegment<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<f64> = (0..n * cfg.segment_samples()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        WaveformSegment::split(&samples, cfg.segment_samples()).unwrap()
    }

    fn session(model: &Model<f64>, variant: Variant, policy: &PolicyConfig, segs: &[WaveformSegment<f64>]) -> SessionOutput {
        let mut engine = IncrementalEngine::with_variant(model, variant).unwrap();
        let mut clock = Clock::simulated(CostTable::zero());
        run_policy(&mut engine, segs, policy, &mut clock).unwrap()
    }

    #[test]
    fn variants_agree() {
        let model = Model::<f64>::random(ModelConfig::default(), WordRule::EveryToken, 11).unwrap();
        let segs = stream(&model.config, 5, 1);
        for policy in [PolicyConfig::wait_k(2, 2), PolicyConfig::hold_n(2)] {
            let policy = PolicyConfig {
                max_tokens_per_write: 6,
                ..policy
            };
            let runs: Vec<_> = Variant::ALL.iter().map(|&v| session(&model, v, &policy, &segs)).collect();
            assert!(!runs[0].tokens.is_empty());
            for r in &runs[1..] {
                assert_eq!(r.tokens, runs[0].tokens);
                assert_eq!(r.log, runs[0].log);
            }
            let total = |r: &SessionOutput| r.step_work.iter().map(Work::total).sum::<u64>();
            assert!(total(&runs[0]) > total(&runs[2]));
        }
    }

    #[test]
    fn rebuilt_cache_matches_incremental() {
        let model = Model::<f64>::random(ModelConfig::default(), WordRule::EveryToken, 5).unwrap();
        let segs = stream(&model.config, 3, 2);
        let mut inc = IncrementalEngine::new(&model).unwrap();
        let mut full = IncrementalEngine::with_variant(&model, Variant::FullRecompute).unwrap();
        let limits = GenerateLimits::words(2);
        for seg in &segs {
            inc.read(seg).unwrap();
            full.read(seg).unwrap();
            assert!(inc.encoder_states().max_abs_diff(full.encoder_states()) <= 1e-10);
            let (a, _) = inc.generate(&limits).unwrap();
            let (b, _) = full.generate(&limits).unwrap();
            assert_eq!(a, b);
            inc.retain(1).unwrap();
            full.retain(1).unwrap();
        }
        let (a, b) = (inc.decoder_cache(), full.decoder_cache());
        assert_eq!(a.modalities(), b.modalities());
        assert_eq!(a.pending(), b.pending());
        for l in 0..model.config.dec_layers {
            assert!(a.keys(l).max_abs_diff(b.keys(l)) <= 1e-10);
        }
    }

    #[test]
    fn retain_zero_restores_state() {
        let model = Model::<f64>::random(ModelConfig::default(), WordRule::Separator, 8).unwrap();
        let segs = stream(&model.config, 2, 3);
        let mut engine = IncrementalEngine::new(&model).unwrap();
        engine.read(&segs[0]).unwrap();
        let limits = GenerateLimits {
            max_tokens: 5,
            ..GenerateLimits::until_eos()
        };
        let (first, _) = engine.generate(&limits).unwrap();
        let len = engine.decoder_cache().len();
        engine.retain(0).unwrap();
        assert!(engine.decoder_cache().len() < len);
        let (again, _) = engine.generate(&limits).unwrap();
        assert_eq!(first, again);
        assert!(engine.retain(first.tokens.len() + 1).is_err());
    }

    #[test]
    fn mismatched_model_rejected() {
        let mut model = Model::<f64>::random(ModelConfig::default(), WordRule::Separator, 1).unwrap();
        model.config.d_model = 32;
        assert!(matches!(IncrementalEngine::new(&model), Err(crate::Error::InvalidConfig(_))));
    }

    #[test]
    fn variant_names() {
        for v in Variant::ALL {
            assert_eq!(Variant::parse(v.name()).unwrap(), v);
        }
        assert!(Variant::parse("fast").is_err());
    }
}
