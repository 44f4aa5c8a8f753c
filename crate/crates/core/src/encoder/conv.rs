use crate::error::{bail, Result};
use crate::tensor::weights::{Initializer, WeightStore};
use crate::tensor::{Macs, Matrix, Real};

/// One-dimensional causal convolution over rows.
///
/// Output row `j` reads the `kernel` input rows ending at `stride * j +
/// stride - 1`, with zeros standing in for negative indices. At stride 1 this
/// is a valid convolution over `kernel - 1` zeros of left padding, so output
/// `t` sees inputs `t - kernel + 1 ..= t`. The output has `floor(l / stride)`
/// rows.
#[derive(Clone, Debug)]
pub struct CausalConv1d<T = f32> {
    /// One `[in x out]` matrix per kernel tap, oldest input first.
    taps: Vec<Matrix<T>>,
    bias: Vec<T>,
    stride: usize,
}

impl<T: Real> CausalConv1d<T> {
    pub fn new(taps: Vec<Matrix<T>>, bias: Vec<T>, stride: usize) -> Result<Self> {
        if taps.is_empty() {
            bail!(InvalidConfig, "convolution needs at least one tap");
        }
        if stride == 0 {
            bail!(InvalidConfig, "stride must be >= 1");
        }
        let shape = taps[0].shape();
        if taps.iter().any(|t| t.shape() != shape) {
            bail!(InvalidConfig, "convolution taps differ in shape");
        }
        if bias.len() != shape.1 {
            bail!(InvalidConfig, "bias length {} != out channels {}", bias.len(), shape.1);
        }
        Ok(Self { taps, bias, stride })
    }

    /// Single-channel convolution from a plain kernel, zero bias.
    pub fn from_kernel(kernel: &[f64], stride: usize) -> Result<Self> {
        let taps = kernel
            .iter()
            .map(|&k| Matrix::from_vec(1, 1, vec![T::from_f64_lossy(k)]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(taps, vec![T::zero()], stride)
    }

    pub fn random(init: &mut Initializer, d_in: usize, d_out: usize, kernel: usize, stride: usize) -> Self {
        let bound = (3.0 / (d_in * kernel) as f64).sqrt();
        let taps = (0..kernel).map(|_| init.uniform(d_in, d_out, bound)).collect();
        let bias = init.vector(d_out, 0.1);
        Self::new(taps, bias, stride).expect("consistent random conv")
    }

    pub fn kernel(&self) -> usize {
        self.taps.len()
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn in_dim(&self) -> usize {
        self.taps[0].rows()
    }

    pub fn out_dim(&self) -> usize {
        self.taps[0].cols()
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        input_len / self.stride
    }

    /// Last input row read by output row `j`.
    pub fn receptive_end(&self, j: usize) -> usize {
        self.stride * j + self.stride - 1
    }

    /// First input row read by output row `j` (0 when the window is padded).
    pub fn receptive_start(&self, j: usize) -> usize {
        (self.receptive_end(j) + 1).saturating_sub(self.kernel())
    }

    pub fn forward(&self, input: &Matrix<T>, macs: &mut Macs) -> Result<Matrix<T>> {
        if input.rows() == 0 {
            bail!(InvalidArgument, "empty convolution input");
        }
        self.forward_rows(input, 0, 0, self.output_len(input.rows()), macs)
    }

    /// Output rows `start..end`, where `input` holds input rows beginning at
    /// absolute index `input_offset`. Rows below the offset must not be
    /// needed by the requested outputs.
    pub fn forward_rows(
        &self,
        input: &Matrix<T>,
        input_offset: usize,
        start: usize,
        end: usize,
        macs: &mut Macs,
    ) -> Result<Matrix<T>> {
        if input.cols() != self.in_dim() {
            bail!(
                InvalidArgument,
                "convolution expects {} channels, got {}",
                self.in_dim(),
                input.cols()
            );
        }
        if end > start && self.receptive_end(end - 1) >= input_offset + input.rows() {
            bail!(InvalidArgument, "output row {} needs input beyond the end", end - 1);
        }
        if end > start && self.receptive_start(start) < input_offset {
            bail!(InvalidArgument, "output row {start} needs input rows before offset {input_offset}");
        }
        let w = self.kernel();
        let d_out = self.out_dim();
        let mut out = Matrix::zeros(end.saturating_sub(start), d_out);
        for j in start..end {
            let o = out.row_mut(j - start);
            o.copy_from_slice(&self.bias);
            let last = self.receptive_end(j) as isize;
            for (m, tap) in self.taps.iter().enumerate() {
                let idx = last + 1 - w as isize + m as isize;
                if idx < 0 {
                    continue;
                }
                let x = input.row(idx as usize - input_offset);
                for (c, &xc) in x.iter().enumerate() {
                    let t = tap.row(c);
                    for (oc, &tc) in o.iter_mut().zip(t) {
                        *oc += xc * tc;
                    }
                }
                macs.add(self.in_dim() * d_out);
            }
        }
        Ok(out)
    }

    pub fn store(&self, prefix: &str, store: &mut WeightStore) {
        for (m, tap) in self.taps.iter().enumerate() {
            store.insert_matrix(&format!("{prefix}.tap{m}"), tap);
        }
        store.insert_vector(&format!("{prefix}.bias"), &self.bias);
    }

    pub fn load(store: &WeightStore, prefix: &str, kernel: usize, stride: usize) -> Result<Self> {
        let taps = (0..kernel)
            .map(|m| store.matrix(&format!("{prefix}.tap{m}")))
            .collect::<Result<Vec<_>>>()?;
        Self::new(taps, store.vector(&format!("{prefix}.bias"))?, stride)
    }
}
