use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{bail, Result};

/// Scalar type of all numeric kernels.
///
/// Implemented for `f32` (the default everywhere) and `f64`, which the
/// strictest equivalence and gradient suites run in.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Large negative stand-in for minus infinity in additive masks.
    const MASK_SENTINEL: Self;

    fn from_f64_lossy(v: f64) -> Self;
}

impl Real for f32 {
    const MASK_SENTINEL: f32 = -1.0e30;

    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }
}

impl Real for f64 {
    const MASK_SENTINEL: f64 = -1.0e300;

    fn from_f64_lossy(v: f64) -> Self {
        v
    }
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix<T = f32> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Debug> Debug for Matrix<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Matrix[{}x{}]", self.rows, self.cols)?;
        if self.data.len() <= 64 && self.cols > 0 {
            f.debug_list().entries(self.data.chunks(self.cols)).finish()?;
        }
        Ok(())
    }
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from raw row-major data, rejecting non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            bail!(
                InvalidArgument,
                "data length {} != {rows} x {cols}",
                data.len()
            );
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            bail!(InvalidArgument, "non-finite entry at flat index {i}");
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            bail!(InvalidArgument, "ragged rows");
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    /// Convenience for literals in tests and examples.
    pub fn from_f64_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<T>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| T::from_f64_lossy(v)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact panics on zero, and a 0-column matrix has no data anyway
        let cols = self.cols.max(1);
        self.data.chunks_exact(cols).take(self.rows)
    }

    /// Copy of rows `start..end`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Matrix<T> {
        assert!(start <= end && end <= self.rows, "row slice out of bounds");
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }

    /// Copy of columns `start..end`.
    pub fn slice_cols(&self, start: usize, end: usize) -> Matrix<T> {
        assert!(start <= end && end <= self.cols, "column slice out of bounds");
        Matrix::from_fn(self.rows, end - start, |r, c| self.get(r, start + c))
    }

    /// Appends the rows of `other` in place.
    pub fn append_rows(&mut self, other: &Matrix<T>) -> Result<()> {
        if self.rows == 0 && self.cols == 0 {
            self.cols = other.cols;
        }
        if other.cols != self.cols {
            bail!(
                InvalidArgument,
                "cannot append {} columns to {}",
                other.cols,
                self.cols
            );
        }
        self.data.extend_from_slice(&other.data);
        self.rows += other.rows;
        Ok(())
    }

    /// Drops every row at index `rows` and beyond.
    pub fn truncate_rows(&mut self, rows: usize) {
        if rows < self.rows {
            self.rows = rows;
            self.data.truncate(rows * self.cols);
        }
    }

    pub fn vstack(parts: &[Matrix<T>]) -> Result<Matrix<T>> {
        let mut out = Matrix::zeros(0, parts.first().map_or(0, |m| m.cols));
        for p in parts {
            out.append_rows(p)?;
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix<T> {
        Matrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// Plain `self · rhs`. Row `i` of the result depends only on row `i` of
    /// `self`, and is computed in the same order regardless of row count.
    pub fn matmul(&self, rhs: &Matrix<T>) -> Result<Matrix<T>> {
        if self.cols != rhs.rows {
            bail!(
                InvalidArgument,
                "matmul shape mismatch {}x{} . {}x{}",
                self.rows,
                self.cols,
                rhs.rows,
                rhs.cols
            );
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let o = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &aik) in a.iter().enumerate() {
                let b = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (oj, &bkj) in o.iter_mut().zip(b) {
                    *oj += aik * bkj;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &Matrix<T>) -> Result<Matrix<T>> {
        if self.shape() != rhs.shape() {
            bail!(InvalidArgument, "add shape mismatch");
        }
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Matrix<T> {
        self.map(|v| v * s)
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute entry-wise difference, as `f64`.
    pub fn max_abs_diff(&self, other: &Matrix<T>) -> f64 {
        assert_eq!(self.shape(), other.shape(), "max_abs_diff shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs().to_f64().unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .map(|v| U::from_f64_lossy(v.to_f64().unwrap_or(f64::NAN)))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_length_and_non_finite() {
        assert!(Matrix::<f32>::from_vec(2, 2, vec![0.0; 3]).is_err());
        assert!(Matrix::<f32>::from_vec(1, 2, vec![0.0, f32::NAN]).is_err());
        assert!(Matrix::<f64>::from_vec(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn matmul_small() {
        let a = Matrix::<f64>::from_f64_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let b = Matrix::<f64>::from_f64_rows(&[&[5.0], &[6.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[17.0, 39.0]);
        assert!(b.matmul(&b).is_err());
    }

    #[test]
    fn append_and_truncate() {
        let mut a = Matrix::<f32>::zeros(0, 0);
        a.append_rows(&Matrix::from_f64_rows(&[&[1.0, 2.0]]).unwrap())
            .unwrap();
        a.append_rows(&Matrix::from_f64_rows(&[&[3.0, 4.0]]).unwrap())
            .unwrap();
        assert_eq!(a.shape(), (2, 2));
        a.truncate_rows(1);
        assert_eq!(a.data(), &[1.0, 2.0]);
        assert!(a.append_rows(&Matrix::zeros(1, 3)).is_err());
    }
}
