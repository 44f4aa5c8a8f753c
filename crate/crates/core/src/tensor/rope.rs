use crate::error::{bail, Result};

use super::{Matrix, Real};

/// Precomputed cos/sin values for rotary position embedding.
///
/// Consecutive dimension pairs `(2i, 2i+1)` are rotated by
/// `position * base^(-2i / head_dim)`.
#[derive(Clone, Debug)]
pub struct RotaryTable<T = f32> {
    max_position: usize,
    head_dim: usize,
    cos: Vec<T>,
    sin: Vec<T>,
}

impl<T: Real> RotaryTable<T> {
    pub const DEFAULT_BASE: f64 = 10_000.0;

    pub fn new(max_position: usize, head_dim: usize, base: f64) -> Result<Self> {
        if head_dim == 0 || head_dim % 2 != 0 {
            bail!(InvalidConfig, "rotary head_dim must be even, got {head_dim}");
        }
        let half = head_dim / 2;
        let mut cos = Vec::with_capacity(max_position * half);
        let mut sin = Vec::with_capacity(max_position * half);
        for pos in 0..max_position {
            for i in 0..half {
                let freq = base.powf(-(2.0 * i as f64) / head_dim as f64);
                let angle = pos as f64 * freq;
                cos.push(T::from_f64_lossy(angle.cos()));
                sin.push(T::from_f64_lossy(angle.sin()));
            }
        }
        Ok(Self {
            max_position,
            head_dim,
            cos,
            sin,
        })
    }

    pub fn max_position(&self) -> usize {
        self.max_position
    }

    pub fn head_dim(&self) -> usize {
        self.head_dim
    }

    /// Rotates every row of `x` (one head, `head_dim` columns) to `position`.
    pub fn apply(&self, x: &Matrix<T>, position: usize) -> Result<Matrix<T>> {
        if x.cols() != self.head_dim {
            bail!(
                InvalidArgument,
                "expected {} columns, got {}",
                self.head_dim,
                x.cols()
            );
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            self.rotate_slice(out.row_mut(r), position)?;
        }
        Ok(out)
    }

    /// Rotates each row `r` of a multi-head matrix in place to `positions[r]`.
    pub fn apply_heads(&self, x: &mut Matrix<T>, positions: &[usize]) -> Result<()> {
        if x.cols() % self.head_dim != 0 {
            bail!(
                InvalidArgument,
                "{} columns are not a multiple of head_dim {}",
                x.cols(),
                self.head_dim
            );
        }
        if positions.len() != x.rows() {
            bail!(
                InvalidArgument,
                "{} positions for {} rows",
                positions.len(),
                x.rows()
            );
        }
        for (r, &pos) in positions.iter().enumerate() {
            for head in x.row_mut(r).chunks_exact_mut(self.head_dim) {
                self.rotate_slice(head, pos)?;
            }
        }
        Ok(())
    }

    fn rotate_slice(&self, v: &mut [T], position: usize) -> Result<()> {
        if position >= self.max_position {
            bail!(
                OutOfRange,
                "position {position} beyond rotary table of {}",
                self.max_position
            );
        }
        let half = self.head_dim / 2;
        let cos = &self.cos[position * half..(position + 1) * half];
        let sin = &self.sin[position * half..(position + 1) * half];
        for (i, pair) in v.chunks_exact_mut(2).enumerate() {
            let (a, b) = (pair[0], pair[1]);
            pair[0] = a * cos[i] - b * sin[i];
            pair[1] = a * sin[i] + b * cos[i];
        }
        Ok(())
    }
}
