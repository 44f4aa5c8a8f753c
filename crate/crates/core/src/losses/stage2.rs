use crate::decoder::{InterleavedLayout, Modality, TokenId};
use crate::encoder::SpeechEmbeddings;
use crate::error::{bail, Result};
use crate::model::Model;
use crate::tensor::{AttentionMask, Macs, Matrix, Real};

/// Teacher-forced layout for policy training: all speech rows, then all
/// text rows. Text row `p` is the input that predicts word `groups[p]`-th
/// group; group `i` may read the first `i + k` segments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stage2MaskSpec {
    pub segment_counts: Vec<usize>,
    pub groups: Vec<usize>,
    pub k: usize,
    pub n: usize,
}

impl Stage2MaskSpec {
    /// One token per word: row `p` predicts word `p` and belongs to group `p / n`.
    pub fn new(segment_counts: Vec<usize>, text_len: usize, k: usize, n: usize) -> Result<Self> {
        let words: Vec<usize> = (0..text_len).collect();
        Self::from_word_indices(segment_counts, &words, k, n)
    }

    /// `words[p]` is the index of the word that text row `p` predicts.
    pub fn from_word_indices(segment_counts: Vec<usize>, words: &[usize], k: usize, n: usize) -> Result<Self> {
        if n == 0 {
            bail!(InvalidConfig, "n must be >= 1");
        }
        let spec = Self {
            segment_counts,
            groups: words.iter().map(|w| w / n).collect(),
            k,
            n,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 {
            bail!(InvalidConfig, "k and n must be >= 1");
        }
        if self.groups.windows(2).any(|w| w[1] < w[0]) {
            bail!(InvalidConfig, "word groups must be nondecreasing");
        }
        Ok(())
    }

    pub fn speech_len(&self) -> usize {
        self.segment_counts.iter().sum()
    }

    pub fn text_len(&self) -> usize {
        self.groups.len()
    }

    /// Number of leading speech rows visible to text in `group`.
    pub fn visible_speech(&self, group: usize) -> usize {
        let segments = (group + self.k).min(self.segment_counts.len());
        self.segment_counts[..segments].iter().sum()
    }

    pub fn layout(&self) -> InterleavedLayout {
        let mut layout = InterleavedLayout::default();
        layout.push(Modality::Speech, self.speech_len());
        layout.push(Modality::Text, self.text_len());
        layout
    }
}

/// Row order of a wait-k-stride-n session with one token per word: read
/// `k` segments, then alternate feeding `n` text rows and reading one
/// segment; once the stream is exhausted all remaining text follows.
pub fn wait_k_schedule(segment_counts: &[usize], text_len: usize, k: usize, n: usize) -> InterleavedLayout {
    let mut layout = InterleavedLayout::default();
    let mut segments = segment_counts.iter();
    for &c in segments.by_ref().take(k) {
        layout.push(Modality::Speech, c);
    }
    let mut fed = 0;
    while fed < text_len {
        let step = if segments.len() == 0 { text_len - fed } else { n.min(text_len - fed) };
        layout.push(Modality::Text, step);
        fed += step;
        if let Some(&c) = segments.next() {
            layout.push(Modality::Speech, c);
        }
    }
    for &c in segments {
        layout.push(Modality::Speech, c);
    }
    layout
}

/// Mask over [speech ⊕ text]: speech is causal among speech, text is causal
/// among text and reads only the speech its group may see.
pub fn build_stage2_mask(spec: &Stage2MaskSpec) -> AttentionMask {
    let s = spec.speech_len();
    let len = s + spec.text_len();
    let visible: Vec<usize> = spec.groups.iter().map(|&g| spec.visible_speech(g)).collect();
    AttentionMask::from_fn(len, len, |q, k| {
        if q < s {
            k <= q
        } else if k < s {
            k < visible[q - s]
        } else {
            k <= q
        }
    })
}

/// Largest logit difference between teacher forcing under the policy mask
/// and incremental decoding in the matching interleaved order.
///
/// `reference` holds the target tokens, one word each; the text inputs are
/// BOS followed by all but the last target.
pub fn stage2_logit_equivalence<T: Real>(
    model: &Model<T>,
    speech: &SpeechEmbeddings<T>,
    reference: &[TokenId],
    k: usize,
    n: usize,
) -> Result<f64> {
    if reference.is_empty() {
        bail!(InvalidInput, "empty reference");
    }
    let dec = &model.decoder;
    let spec = Stage2MaskSpec::new(speech.segment_counts(), reference.len(), k, n)?;
    let mut inputs = vec![model.vocab.bos];
    inputs.extend_from_slice(&reference[..reference.len() - 1]);
    let text = dec.embed_tokens(&inputs)?;
    let mut macs = Macs::default();

    let train_in = Matrix::vstack(&[speech.matrix().clone(), text.clone()])?;
    let mask = build_stage2_mask(&spec);
    let train = dec.forward_full(&train_in, &spec.layout(), &mask, &mut macs)?;
    let s = spec.speech_len();
    let train = train.slice_rows(s, train.rows());

    let mut cache = dec.new_cache();
    let mut infer = Matrix::zeros(0, dec.vocab_size());
    let (mut speech_at, mut text_at) = (0, 0);
    for &(modality, len) in wait_k_schedule(&spec.segment_counts, reference.len(), k, n).spans() {
        match modality {
            Modality::Speech => {
                let rows = speech.matrix().slice_rows(speech_at, speech_at + len);
                dec.append(&mut cache, &rows, Modality::Speech, &mut macs)?;
                speech_at += len;
            }
            Modality::Text => {
                for _ in 0..len {
                    let row = text.slice_rows(text_at, text_at + 1);
                    let out = dec.append(&mut cache, &row, Modality::Text, &mut macs)?;
                    infer.append_rows(&dec.logits(&out.hidden, &mut macs)?)?;
                    text_at += 1;
                }
            }
        }
    }
    Ok(train.max_abs_diff(&infer))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_see_their_segments() {
        // two embeddings per segment, three segments, n=2, k=1
        let spec = Stage2MaskSpec::new(vec![2, 2, 2], 6, 1, 2).unwrap();
        let mask = build_stage2_mask(&spec);
        let visible = |row: usize| (0..6).filter(|&j| mask.allowed(6 + row, j)).count();
        assert_eq!([visible(0), visible(1), visible(2), visible(3), visible(4), visible(5)], [2, 2, 4, 4, 6, 6]);
        for q in 0..6 {
            for t in 6..12 {
                assert!(!mask.allowed(q, t));
            }
        }
        assert!(mask.allowed(8, 7) && !mask.allowed(7, 8));
    }

    #[test]
    fn large_k_is_offline() {
        let spec = Stage2MaskSpec::new(vec![3, 3], 4, 100, 3).unwrap();
        let mask = build_stage2_mask(&spec);
        for t in 6..10 {
            assert!((0..6).all(|j| mask.allowed(t, j)));
        }
        assert_eq!(wait_k_schedule(&[3, 3], 4, 100, 3).spans(), &[(Modality::Speech, 6), (Modality::Text, 4)]);
    }

    #[test]
    fn inference_order() {
        use Modality::*;
        assert_eq!(
            wait_k_schedule(&[1, 1, 1], 3, 1, 2).spans(),
            &[(Speech, 1), (Text, 2), (Speech, 1), (Text, 1), (Speech, 1)]
        );
        assert_eq!(
            wait_k_schedule(&[1, 1, 1], 5, 1, 1).spans(),
            &[(Speech, 1), (Text, 1), (Speech, 1), (Text, 1), (Speech, 1), (Text, 3)]
        );
        assert!(Stage2MaskSpec::from_word_indices(vec![1], &[1, 0], 1, 1).is_err());
        assert!(Stage2MaskSpec::new(vec![1], 1, 0, 1).is_err());
    }

    #[test]
    fn training_matches_inference_f64() {
        use crate::config::ModelConfig;
        use crate::decoder::WordRule;
        use crate::tensor::weights::Initializer;

        let model = Model::<f64>::random(ModelConfig::default(), WordRule::EveryToken, 2).unwrap();
        let mut init = Initializer::new(9);
        let mut speech = SpeechEmbeddings::new(model.config.d_model);
        for rows in [2, 2, 2] {
            speech.push_segment(&init.uniform(rows, model.config.d_model, 1.0)).unwrap();
        }
        let reference = [5, 9, 4, 4, 17, 3, 8];
        for (k, n) in [(1, 2), (2, 1), (100, 3)] {
            let dev = stage2_logit_equivalence(&model, &speech, &reference, k, n).unwrap();
            assert!(dev <= 1e-10, "k={k} n={n} dev={dev}");
        }
    }
}
