use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::tensor::{Matrix, Real};

pub const DEFAULT_TAU: f64 = 0.2;

/// One word with its speech-row and text-token ranges (end exclusive).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSpan {
    pub word: String,
    pub speech_start: usize,
    pub speech_end: usize,
    pub text_start: usize,
    pub text_end: usize,
}

/// Word boundaries of one utterance, stored as a JSON list of [`WordSpan`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WordAlignment {
    pub words: Vec<WordSpan>,
}

impl WordAlignment {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn speech_ranges(&self) -> Vec<Range<usize>> {
        self.words.iter().map(|w| w.speech_start..w.speech_end).collect()
    }

    pub fn text_ranges(&self) -> Vec<Range<usize>> {
        self.words.iter().map(|w| w.text_start..w.text_end).collect()
    }

    pub fn validate(&self, speech_rows: usize, text_rows: usize) -> Result<()> {
        check_ranges(&self.speech_ranges(), speech_rows)?;
        check_ranges(&self.text_ranges(), text_rows)
    }
}

fn check_ranges(ranges: &[Range<usize>], rows: usize) -> Result<()> {
    let mut prev_end = 0;
    for (i, r) in ranges.iter().enumerate() {
        if r.start >= r.end {
            bail!(InvalidAlignment, "word {i}: empty range {r:?}");
        }
        if r.end > rows {
            bail!(InvalidAlignment, "word {i}: range {r:?} exceeds {rows} rows");
        }
        if r.start < prev_end {
            bail!(InvalidAlignment, "word {i}: range {r:?} overlaps or precedes the previous word");
        }
        prev_end = r.end;
    }
    Ok(())
}

/// Mean of the rows in each range, one output row per range.
pub fn group_words<T: Real>(embeddings: &Matrix<T>, ranges: &[Range<usize>]) -> Result<Matrix<T>> {
    check_ranges(ranges, embeddings.rows())?;
    let mut out = Matrix::zeros(ranges.len(), embeddings.cols());
    for (w, r) in ranges.iter().enumerate() {
        let inv = T::one() / T::from_usize(r.len()).unwrap();
        let dst = out.row_mut(w);
        for row in r.clone() {
            for (d, &x) in dst.iter_mut().zip(embeddings.row(row)) {
                *d = *d + x;
            }
        }
        for d in dst.iter_mut() {
            *d = *d * inv;
        }
    }
    Ok(out)
}

/// Gradient of [`group_words`] with respect to its input rows.
pub fn group_words_backward<T: Real>(
    grad_words: &Matrix<T>,
    ranges: &[Range<usize>],
    rows: usize,
) -> Result<Matrix<T>> {
    check_ranges(ranges, rows)?;
    if grad_words.rows() != ranges.len() {
        bail!(InvalidArgument, "{} word gradients for {} ranges", grad_words.rows(), ranges.len());
    }
    let mut out = Matrix::zeros(rows, grad_words.cols());
    for (w, r) in ranges.iter().enumerate() {
        let inv = T::one() / T::from_usize(r.len()).unwrap();
        for row in r.clone() {
            for (d, &g) in out.row_mut(row).iter_mut().zip(grad_words.row(w)) {
                *d = g * inv;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct WacoGrad<T = f32> {
    pub loss: T,
    pub grad_speech: Matrix<T>,
    pub grad_text: Matrix<T>,
}

fn norms<T: Real>(m: &Matrix<T>, what: &str) -> Result<Vec<T>> {
    m.iter_rows()
        .enumerate()
        .map(|(i, r)| {
            let n = r.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
            if n > T::zero() && n.is_finite() {
                Ok(n)
            } else {
                bail!(InvalidInput, "{what} word {i} has zero or non-finite norm")
            }
        })
        .collect()
}

/// Contrastive loss between speech and text word embeddings: each speech
/// word must pick out its own text word among all text words of the
/// utterance, by cosine similarity over temperature `tau`.
pub fn waco_loss<T: Real>(speech: &Matrix<T>, text: &Matrix<T>, tau: T) -> Result<T> {
    Ok(waco_loss_grad(speech, text, tau)?.loss)
}

/// [`waco_loss`] together with its gradients for both inputs.
pub fn waco_loss_grad<T: Real>(speech: &Matrix<T>, text: &Matrix<T>, tau: T) -> Result<WacoGrad<T>> {
    let n = speech.rows();
    if n == 0 || text.rows() != n {
        bail!(InvalidInput, "need matching nonzero word counts, got {n} and {}", text.rows());
    }
    if speech.cols() != text.cols() {
        bail!(InvalidInput, "widths differ: {} vs {}", speech.cols(), text.cols());
    }
    if !(tau > T::zero()) {
        bail!(InvalidArgument, "tau must be positive");
    }
    let ns = norms(speech, "speech")?;
    let nt = norms(text, "text")?;
    let dot = speech.matmul(&text.transpose())?;
    let cos = Matrix::from_fn(n, n, |i, j| dot.get(i, j) / (ns[i] * nt[j]));

    let n_t = T::from_usize(n).unwrap();
    let mut loss = T::zero();
    // d loss / d cos
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        let logits: Vec<T> = cos.row(i).iter().map(|&c| c / tau).collect();
        let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
        let total: T = exps.iter().copied().sum();
        loss = loss + (total.ln() + max - logits[i]);
        for j in 0..n {
            let p = exps[j] / total;
            let target = if i == j { T::one() } else { T::zero() };
            g.set(i, j, (p - target) / (tau * n_t));
        }
    }
    loss = loss / n_t;

    let d = speech.cols();
    let mut grad_speech = Matrix::zeros(n, d);
    let mut grad_text = Matrix::zeros(n, d);
    for i in 0..n {
        for j in 0..n {
            let gij = g.get(i, j);
            let c = cos.get(i, j);
            let cross = gij / (ns[i] * nt[j]);
            let self_s = gij * c / (ns[i] * ns[i]);
            let self_t = gij * c / (nt[j] * nt[j]);
            let (s, t) = (speech.row(i), text.row(j));
            for k in 0..d {
                let gs = grad_speech.get(i, k) + cross * t[k] - self_s * s[k];
                grad_speech.set(i, k, gs);
                let gt = grad_text.get(j, k) + cross * s[k] - self_t * t[k];
                grad_text.set(j, k, gt);
            }
        }
    }
    Ok(WacoGrad {
        loss,
        grad_speech,
        grad_text,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::finite_diff_grad;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_f64_rows(rows).unwrap()
    }

    #[test]
    fn mean_pooling() {
        let e = m(&[&[1.0, 1.0], &[3.0, 3.0], &[9.0, 0.0]]);
        let w = group_words(&e, &[0..2, 2..3]).unwrap();
        assert_eq!(w, m(&[&[2.0, 2.0], &[9.0, 0.0]]));
        assert!(matches!(group_words(&e, &[0..4]), Err(crate::Error::InvalidAlignment(_))));
        assert!(group_words(&e, &[1..1]).is_err());
        assert!(group_words(&e, &[1..3, 0..1]).is_err());
    }

    #[test]
    fn pooling_backward_matches_fd() {
        let e = m(&[&[1.0, -2.0], &[3.0, 0.5], &[0.2, 0.7], &[4.0, 4.0]]);
        let ranges = [0..2, 3..4];
        let weights = m(&[&[0.3, -1.0], &[2.0, 0.1]]);
        let f = |x: &Matrix<f64>| {
            let w = group_words(x, &ranges)?;
            Ok(w.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum())
        };
        let fd = finite_diff_grad(f, &e, 1e-6).unwrap();
        let an = group_words_backward(&weights, &ranges, 4).unwrap();
        assert!(fd.max_abs_diff(&an) < 1e-8);
    }

    #[test]
    fn single_word_is_zero() {
        let s = m(&[&[0.3, -0.1, 2.0]]);
        let t = m(&[&[-1.0, 0.4, 0.0]]);
        assert_eq!(waco_loss(&s, &t, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn orthogonal_pair() {
        let s = m(&[&[1.0, 0.0], &[0.0, 2.0]]);
        let t = m(&[&[3.0, 0.0], &[0.0, 0.5]]);
        // cos = I, so each row is -log(e^5 / (e^5 + e^0))
        let oracle = (1.0f64 + (-5.0f64).exp()).ln();
        assert!((waco_loss(&s, &t, 0.2).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn zero_vector_rejected() {
        let s = m(&[&[0.0, 0.0]]);
        let t = m(&[&[1.0, 0.0]]);
        assert!(matches!(waco_loss(&s, &t, 0.2), Err(crate::Error::InvalidInput(_))));
        assert!(waco_loss(&m(&[&[1.0, 0.0]]), &m(&[&[1.0, 0.0], &[0.0, 1.0]]), 0.2).is_err());
    }
}
