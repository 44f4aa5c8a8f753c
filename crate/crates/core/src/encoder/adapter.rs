use crate::config::ModelConfig;
use crate::error::{bail, Result};
use crate::tensor::weights::{Initializer, WeightStore};
use crate::tensor::{gelu, Linear, Macs, Matrix, Real};

use crate::tensor::block::{load_linear, store_linear};
use super::CausalConv1d;

/// Two strided causal convolutions and a projection into the decoder's
/// embedding space; shortens the encoder output by the product of strides.
#[derive(Clone, Debug)]
pub struct Adapter<T = f32> {
    pub conv1: CausalConv1d<T>,
    pub conv2: CausalConv1d<T>,
    pub proj: Linear<T>,
}

impl<T: Real> Adapter<T> {
    pub fn random(cfg: &ModelConfig, init: &mut Initializer) -> Self {
        let [c1, c2] = cfg.adapter;
        Self {
            conv1: CausalConv1d::random(init, cfg.d_enc, cfg.d_enc, c1.kernel, c1.stride),
            conv2: CausalConv1d::random(init, cfg.d_enc, cfg.d_enc, c2.kernel, c2.stride),
            proj: Linear::new(init.weight(cfg.d_enc, cfg.d_model, 1.0), Some(init.vector(cfg.d_model, 0.02))).unwrap(),
        }
    }

    /// Embeddings produced from `len` encoder states.
    pub fn output_len(&self, len: usize) -> usize {
        self.conv2.output_len(self.conv1.output_len(len))
    }

    /// Reference path over all states.
    pub fn adapt_full(&self, states: &Matrix<T>, macs: &mut Macs) -> Result<Matrix<T>> {
        self.adapt(states, 0, macs)
    }

    /// Embeddings with index `prev_count..` given every encoder state so far.
    ///
    /// Only the convolution rows the new embeddings depend on are evaluated;
    /// results match [`Adapter::adapt_full`] bit for bit.
    pub fn adapt(&self, states: &Matrix<T>, prev_count: usize, macs: &mut Macs) -> Result<Matrix<T>> {
        let total = self.output_len(states.rows());
        if prev_count > total {
            bail!(
                InvalidArgument,
                "{prev_count} embeddings already emitted but only {total} exist"
            );
        }
        if prev_count == total {
            return Ok(Matrix::zeros(0, self.proj.out_dim()));
        }
        let lo = self.conv2.receptive_start(prev_count);
        let hi = self.conv2.receptive_end(total - 1) + 1;
        let mid = self.conv1.forward_rows(states, 0, lo, hi, macs)?.map(gelu);
        let out = self.conv2.forward_rows(&mid, lo, prev_count, total, macs)?.map(gelu);
        self.proj.forward(&out, macs)
    }

    pub fn store(&self, p: &str, s: &mut WeightStore) {
        self.conv1.store(&format!("{p}.conv1"), s);
        self.conv2.store(&format!("{p}.conv2"), s);
        store_linear(&self.proj, &format!("{p}.proj"), s);
    }

    pub fn load(s: &WeightStore, p: &str, cfg: &ModelConfig) -> Result<Self> {
        let [c1, c2] = cfg.adapter;
        Ok(Self {
            conv1: CausalConv1d::load(s, &format!("{p}.conv1"), c1.kernel, c1.stride)?,
            conv2: CausalConv1d::load(s, &format!("{p}.conv2"), c2.kernel, c2.stride)?,
            proj: load_linear(s, &format!("{p}.proj"))?,
        })
    }
}

/// Accumulated speech embeddings with per-segment cumulative counts.
#[derive(Clone, Debug)]
pub struct SpeechEmbeddings<T = f32> {
    matrix: Matrix<T>,
    boundaries: Vec<usize>,
}

impl<T: Real> SpeechEmbeddings<T> {
    pub fn new(width: usize) -> Self {
        Self {
            matrix: Matrix::zeros(0, width),
            boundaries: Vec::new(),
        }
    }

    /// Records the embeddings produced by one more segment (possibly none).
    pub fn push_segment(&mut self, rows: &Matrix<T>) -> Result<()> {
        self.matrix.append_rows(rows)?;
        self.boundaries.push(self.matrix.rows());
        Ok(())
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.rows() == 0
    }

    /// Cumulative embedding count after each segment.
    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    /// Embedding count contributed by each segment.
    pub fn segment_counts(&self) -> Vec<usize> {
        let mut prev = 0;
        self.boundaries
            .iter()
            .map(|&b| {
                let c = b - prev;
                prev = b;
                c
            })
            .collect()
    }
}
