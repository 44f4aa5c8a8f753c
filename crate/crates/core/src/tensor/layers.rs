use crate::error::{bail, Result};

use super::{Matrix, Real};

/// Running count of multiply-accumulate operations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Macs(pub u64);

impl Macs {
    #[inline]
    pub fn add(&mut self, n: usize) {
        self.0 += n as u64;
    }

    /// Cost of attending `queries` rows to `keys` rows of width `width`
    /// (scores plus weighted sum).
    #[inline]
    pub fn add_attention(&mut self, queries: usize, keys: usize, width: usize) {
        self.add(2 * queries * keys * width);
    }
}

/// Tanh approximation of GELU.
pub fn gelu<T: Real>(x: T) -> T {
    let half = T::from_f64_lossy(0.5);
    let c = T::from_f64_lossy((2.0 / std::f64::consts::PI).sqrt());
    let k = T::from_f64_lossy(0.044_715);
    half * x * (T::one() + (c * (x + k * x * x * x)).tanh())
}

/// `y = x W + b` with `W` stored as `[in x out]`.
#[derive(Clone, Debug)]
pub struct Linear<T = f32> {
    pub weight: Matrix<T>,
    pub bias: Option<Vec<T>>,
}

impl<T: Real> Linear<T> {
    pub fn new(weight: Matrix<T>, bias: Option<Vec<T>>) -> Result<Self> {
        if let Some(b) = &bias {
            if b.len() != weight.cols() {
                bail!(
                    InvalidArgument,
                    "bias length {} != output width {}",
                    b.len(),
                    weight.cols()
                );
            }
        }
        Ok(Self { weight, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &Matrix<T>, macs: &mut Macs) -> Result<Matrix<T>> {
        let mut y = x.matmul(&self.weight)?;
        macs.add(x.rows() * self.in_dim() * self.out_dim());
        if let Some(b) = &self.bias {
            for r in 0..y.rows() {
                for (v, &bv) in y.row_mut(r).iter_mut().zip(b) {
                    *v += bv;
                }
            }
        }
        Ok(y)
    }
}

/// Row-wise layer normalization with learned gain and shift.
#[derive(Clone, Debug)]
pub struct LayerNorm<T = f32> {
    pub gain: Vec<T>,
    pub shift: Vec<T>,
    pub eps: T,
}

impl<T: Real> LayerNorm<T> {
    pub fn new(gain: Vec<T>, shift: Vec<T>) -> Result<Self> {
        if gain.len() != shift.len() {
            bail!(InvalidArgument, "layer norm gain/shift length mismatch");
        }
        Ok(Self {
            gain,
            shift,
            eps: T::from_f64_lossy(1e-5),
        })
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols() != self.gain.len() {
            bail!(
                InvalidArgument,
                "layer norm width {} != input width {}",
                self.gain.len(),
                x.cols()
            );
        }
        let n = T::from_usize(x.cols()).unwrap();
        let mut out = x.clone();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let inv = T::one() / (var + self.eps).sqrt();
            for ((v, &g), &s) in row.iter_mut().zip(&self.gain).zip(&self.shift) {
                *v = (*v - mean) * inv * g + s;
            }
        }
        Ok(out)
    }
}
