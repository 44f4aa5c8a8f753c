use crate::config::ModelConfig;
use crate::error::{bail, Result};
use crate::tensor::weights::{Initializer, WeightStore};
use crate::tensor::{gelu, Macs, Matrix, Real};

use super::{CausalConv1d, WaveformSegment};

/// Stack of strided causal convolutions with GELU, waveform to frames.
#[derive(Clone, Debug)]
pub struct FeatureExtractor<T = f32> {
    convs: Vec<CausalConv1d<T>>,
}

impl<T: Real> FeatureExtractor<T> {
    pub fn new(convs: Vec<CausalConv1d<T>>) -> Result<Self> {
        if convs.is_empty() {
            bail!(InvalidConfig, "feature extractor needs at least one convolution");
        }
        if convs[0].in_dim() != 1 {
            bail!(InvalidConfig, "first convolution must read one channel");
        }
        for pair in convs.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                bail!(InvalidConfig, "convolution channel mismatch");
            }
        }
        Ok(Self { convs })
    }

    pub fn random(cfg: &ModelConfig, init: &mut Initializer) -> Self {
        let mut d_in = 1;
        let convs = cfg
            .extractor
            .iter()
            .map(|spec| {
                let conv = CausalConv1d::random(init, d_in, cfg.d_feat, spec.kernel, spec.stride);
                d_in = cfg.d_feat;
                conv
            })
            .collect();
        Self::new(convs).expect("consistent random extractor")
    }

    pub fn total_stride(&self) -> usize {
        self.convs.iter().map(CausalConv1d::stride).product()
    }

    pub fn d_feat(&self) -> usize {
        self.convs.last().map_or(0, CausalConv1d::out_dim)
    }

    /// Frames for a whole waveform at once.
    pub fn extract(&self, samples: &[T], macs: &mut Macs) -> Result<Matrix<T>> {
        if samples.is_empty() {
            bail!(InvalidArgument, "empty waveform");
        }
        let mut x = Matrix::from_fn(samples.len(), 1, |r, _| samples[r]);
        for conv in &self.convs {
            if x.rows() == 0 {
                break;
            }
            x = conv.forward(&x, macs)?.map(gelu);
        }
        Ok(x)
    }

    /// Frames of one segment in isolation, `block_size` rows.
    pub fn extract_segment(
        &self,
        segment: &WaveformSegment<T>,
        block_size: usize,
        macs: &mut Macs,
    ) -> Result<Matrix<T>> {
        let expected = block_size * self.total_stride();
        if segment.samples().len() != expected {
            bail!(
                InvalidSegment,
                "segment has {} samples, expected {expected}",
                segment.samples().len()
            );
        }
        self.extract(segment.samples(), macs)
    }

    pub fn store(&self, prefix: &str, store: &mut WeightStore) {
        for (i, c) in self.convs.iter().enumerate() {
            c.store(&format!("{prefix}.conv{i}"), store);
        }
    }

    pub fn load(store: &WeightStore, prefix: &str, cfg: &ModelConfig) -> Result<Self> {
        let convs = cfg
            .extractor
            .iter()
            .enumerate()
            .map(|(i, s)| CausalConv1d::load(store, &format!("{prefix}.conv{i}"), s.kernel, s.stride))
            .collect::<Result<Vec<_>>>()?;
        Self::new(convs)
    }
}

/// Incremental front-end state: each pushed segment yields only its frames,
/// identical to what [`FeatureExtractor::extract`] gives over the whole
/// stream so far.
#[derive(Clone, Debug, Default)]
pub struct FeatureStream<T = f32> {
    /// Input history of every convolution (waveform first).
    history: Vec<Matrix<T>>,
    frames: usize,
}

impl<T: Real> FeatureStream<T> {
    pub fn new() -> Self {
        Self {
            history: Vec::new(),
            frames: 0,
        }
    }

    pub fn frames_emitted(&self) -> usize {
        self.frames
    }

    pub fn push(
        &mut self,
        extractor: &FeatureExtractor<T>,
        segment: &WaveformSegment<T>,
        block_size: usize,
        macs: &mut Macs,
    ) -> Result<Matrix<T>> {
        let expected = block_size * extractor.total_stride();
        if segment.samples().len() != expected {
            bail!(
                InvalidSegment,
                "segment has {} samples, expected {expected}",
                segment.samples().len()
            );
        }
        if self.history.is_empty() {
            self.history = (0..extractor.convs.len())
                .map(|i| Matrix::zeros(0, if i == 0 { 1 } else { extractor.convs[i - 1].out_dim() }))
                .collect();
        }
        let samples = segment.samples();
        self.history[0].append_rows(&Matrix::from_fn(samples.len(), 1, |r, _| samples[r]))?;
        let mut new_rows = Matrix::zeros(0, 0);
        for (i, conv) in extractor.convs.iter().enumerate() {
            let input = &self.history[i];
            let done = if i + 1 < self.history.len() {
                self.history[i + 1].rows()
            } else {
                self.frames
            };
            let total = conv.output_len(input.rows());
            new_rows = conv.forward_rows(input, 0, done, total, macs)?.map(gelu);
            if i + 1 < self.history.len() {
                self.history[i + 1].append_rows(&new_rows)?;
            }
        }
        self.frames += new_rows.rows();
        Ok(new_rows)
    }
}
