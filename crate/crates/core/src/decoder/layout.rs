use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::tensor::AttentionMask;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Speech,
    Text,
}

impl Modality {
    /// 0 for speech, 1 for text.
    pub fn indicator(self) -> u8 {
        match self {
            Modality::Speech => 0,
            Modality::Text => 1,
        }
    }
}

/// Run-length description of the decoder input.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InterleavedLayout {
    spans: Vec<(Modality, usize)>,
}

impl InterleavedLayout {
    pub fn new(spans: Vec<(Modality, usize)>) -> Result<Self> {
        if spans.iter().any(|&(_, n)| n == 0) {
            bail!(InvalidArgument, "layout spans must be non-empty");
        }
        let mut layout = Self::default();
        for (m, n) in spans {
            layout.push(m, n);
        }
        Ok(layout)
    }

    /// Appends a span, merging it into the last one when the modality
    /// matches; empty spans are skipped.
    pub fn push(&mut self, modality: Modality, len: usize) {
        if len == 0 {
            return;
        }
        match self.spans.last_mut() {
            Some((m, n)) if *m == modality => *n += len,
            _ => self.spans.push((modality, len)),
        }
    }

    pub fn spans(&self) -> &[(Modality, usize)] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.spans.iter().map(|&(_, n)| n).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Modality of every position.
    pub fn modalities(&self) -> Vec<Modality> {
        self.spans
            .iter()
            .flat_map(|&(m, n)| std::iter::repeat(m).take(n))
            .collect()
    }

    /// Row indices of the given modality, in order.
    pub fn indices_of(&self, modality: Modality) -> Vec<usize> {
        self.modalities()
            .into_iter()
            .enumerate()
            .filter_map(|(i, m)| (m == modality).then_some(i))
            .collect()
    }

    /// Same layout with every text span removed.
    pub fn speech_only(&self) -> InterleavedLayout {
        let mut out = InterleavedLayout::default();
        for &(m, n) in &self.spans {
            if m == Modality::Speech {
                out.push(m, n);
            }
        }
        out
    }
}

/// Text attends causally to everything; speech attends causally to speech.
pub fn build_consistency_mask(layout: &InterleavedLayout) -> AttentionMask {
    let modality = layout.modalities();
    let n = modality.len();
    AttentionMask::from_fn(n, n, |q, k| {
        q >= k && modality[q].indicator() >= modality[k].indicator()
    })
}

/// Separate position counters for speech and text, both starting at 0.
pub fn assign_positions(layout: &InterleavedLayout) -> Vec<usize> {
    let (mut speech, mut text) = (0, 0);
    layout
        .modalities()
        .into_iter()
        .map(|m| {
            let c = match m {
                Modality::Speech => &mut speech,
                Modality::Text => &mut text,
            };
            *c += 1;
            *c - 1
        })
        .collect()
}
