use crate::error::{bail, Result};

use super::{Matrix, Real};

/// Central-difference gradient of a scalar function of a matrix.
pub fn finite_diff_grad<T: Real>(
    f: impl Fn(&Matrix<T>) -> Result<T>,
    x: &Matrix<T>,
    eps: T,
) -> Result<Matrix<T>> {
    if !(eps > T::zero()) {
        bail!(InvalidArgument, "eps must be positive");
    }
    let mut probe = x.clone();
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    let two_eps = eps + eps;
    for i in 0..x.data().len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let plus = f(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let minus = f(&probe)?;
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            bail!(NumericFailure, "non-finite function value at flat index {i}");
        }
        grad.data_mut()[i] = (plus - minus) / two_eps;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_and_sum() {
        let x = Matrix::<f64>::from_f64_rows(&[&[3.0]]).unwrap();
        let g = finite_diff_grad(|m| Ok(m.data().iter().map(|v| v * v).sum()), &x, 1e-4).unwrap();
        assert!((g.get(0, 0) - 6.0).abs() < 1e-6);

        let x = Matrix::<f64>::from_f64_rows(&[&[1.0, -2.0], &[0.5, 9.0]]).unwrap();
        let g = finite_diff_grad(|m| Ok(m.sum()), &x, 1e-4).unwrap();
        assert!(g.data().iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn non_finite_is_reported() {
        let x = Matrix::<f64>::from_f64_rows(&[&[0.0]]).unwrap();
        let r = finite_diff_grad(|m| Ok(1.0 / (m.get(0, 0) - 1e-4)), &x, 1e-4);
        assert!(matches!(r, Err(crate::Error::NumericFailure(_))));
    }
}
