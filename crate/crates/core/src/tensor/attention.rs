use crate::error::{bail, Result};

use super::{Macs, Matrix, Real};

/// Boolean attention mask: `true` is an additive 0, `false` an additive -inf.
#[derive(Clone, PartialEq, Eq)]
pub struct AttentionMask {
    rows: usize,
    cols: usize,
    allowed: Vec<bool>,
}

impl std::fmt::Debug for AttentionMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "AttentionMask[{}x{}]", self.rows, self.cols)?;
        f.write_str(&self.to_grid())
    }
}

impl AttentionMask {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut allowed = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                allowed.push(f(r, c));
            }
        }
        Self {
            rows,
            cols,
            allowed,
        }
    }

    pub fn all_allowed(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |_, _| true)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn allowed(&self, q: usize, k: usize) -> bool {
        self.allowed[q * self.cols + k]
    }

    pub fn set(&mut self, q: usize, k: usize, allowed: bool) {
        self.allowed[q * self.cols + k] = allowed;
    }

    /// Allowed key indices of query row `q`.
    pub fn allowed_keys(&self, q: usize) -> Vec<usize> {
        (0..self.cols).filter(|&k| self.allowed(q, k)).collect()
    }

    /// First query row that allows no key, if any.
    pub fn first_empty_row(&self) -> Option<usize> {
        (0..self.rows).find(|&q| !(0..self.cols).any(|k| self.allowed(q, k)))
    }

    /// Rows `start..end` of the mask, all columns.
    pub fn slice_rows(&self, start: usize, end: usize) -> AttentionMask {
        AttentionMask::from_fn(end - start, self.cols, |q, k| self.allowed(start + q, k))
    }

    /// Renders the mask as lines of `0`/`1` separated by spaces.
    pub fn to_grid(&self) -> String {
        let mut s = String::with_capacity(self.rows * self.cols * 2);
        for q in 0..self.rows {
            let line: Vec<&str> = (0..self.cols)
                .map(|k| if self.allowed(q, k) { "1" } else { "0" })
                .collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Single-head scaled dot-product attention under a mask.
///
/// Masked keys receive exactly zero weight. Every query row must allow at
/// least one key.
pub fn masked_attention<T: Real>(
    q: &Matrix<T>,
    k: &Matrix<T>,
    v: &Matrix<T>,
    mask: &AttentionMask,
    scale: T,
) -> Result<Matrix<T>> {
    if mask.rows() != q.rows() || mask.cols() != k.rows() {
        bail!(
            InvalidArgument,
            "mask {}x{} does not match {} queries x {} keys",
            mask.rows(),
            mask.cols(),
            q.rows(),
            k.rows()
        );
    }
    attend(q, k, v, 1, scale, |i, j| mask.allowed(i, j), &mut Macs::default())
}

/// Multi-head attention over column-partitioned heads with the
/// `1/sqrt(head_dim)` scale. `allowed(i, j)` decides whether query `i` may
/// see key `j`; only allowed pairs are computed and charged to `macs`.
pub fn attend_heads<T: Real>(
    q: &Matrix<T>,
    k: &Matrix<T>,
    v: &Matrix<T>,
    n_heads: usize,
    allowed: impl Fn(usize, usize) -> bool,
    macs: &mut Macs,
) -> Result<Matrix<T>> {
    if n_heads == 0 || q.cols() % n_heads != 0 {
        bail!(
            InvalidArgument,
            "{} columns do not split into {n_heads} heads",
            q.cols()
        );
    }
    let head_dim = q.cols() / n_heads;
    let scale = T::one() / T::from_usize(head_dim).unwrap().sqrt();
    attend(q, k, v, n_heads, scale, allowed, macs)
}

fn attend<T: Real>(
    q: &Matrix<T>,
    k: &Matrix<T>,
    v: &Matrix<T>,
    n_heads: usize,
    scale: T,
    allowed: impl Fn(usize, usize) -> bool,
    macs: &mut Macs,
) -> Result<Matrix<T>> {
    if q.cols() != k.cols() {
        bail!(
            InvalidArgument,
            "query width {} != key width {}",
            q.cols(),
            k.cols()
        );
    }
    if k.rows() != v.rows() {
        bail!(
            InvalidArgument,
            "{} keys but {} values",
            k.rows(),
            v.rows()
        );
    }
    if q.cols() % n_heads != 0 || v.cols() % n_heads != 0 {
        bail!(InvalidArgument, "widths do not split into {n_heads} heads");
    }
    let qd = q.cols() / n_heads;
    let vd = v.cols() / n_heads;
    let n_keys = k.rows();
    let mut out = Matrix::zeros(q.rows(), v.cols());
    let mut scores = vec![T::zero(); n_keys];
    let mut mask_row = vec![false; n_keys];

    for i in 0..q.rows() {
        let mut n_allowed = 0;
        for (j, m) in mask_row.iter_mut().enumerate() {
            *m = allowed(i, j);
            n_allowed += usize::from(*m);
        }
        if n_allowed == 0 {
            bail!(InvalidMask, "query row {i} has no allowed key");
        }
        macs.add(n_allowed * (q.cols() + v.cols()));
        let q_row = q.row(i);
        for h in 0..n_heads {
            let qh = &q_row[h * qd..(h + 1) * qd];
            let mut max = T::MASK_SENTINEL;
            for (j, s) in scores.iter_mut().enumerate() {
                *s = if mask_row[j] {
                    let kh = &k.row(j)[h * qd..(h + 1) * qd];
                    qh.iter().zip(kh).fold(T::zero(), |acc, (&a, &b)| acc + a * b) * scale
                } else {
                    T::MASK_SENTINEL
                };
                if *s > max {
                    max = *s;
                }
            }
            let mut total = T::zero();
            for (j, s) in scores.iter_mut().enumerate() {
                *s = if mask_row[j] {
                    (*s - max).exp()
                } else {
                    T::zero()
                };
                total += *s;
            }
            let o = &mut out.row_mut(i)[h * vd..(h + 1) * vd];
            for (j, &w) in scores.iter().enumerate() {
                if !mask_row[j] {
                    continue;
                }
                let p = w / total;
                let vh = &v.row(j)[h * vd..(h + 1) * vd];
                for (oc, &vc) in o.iter_mut().zip(vh) {
                    *oc += p * vc;
                }
            }
        }
    }
    Ok(out)
}
