//! Small least-squares polynomial fits for benchmark counters.

/// Polynomial coefficients (constant first) and the coefficient of
/// determination of the fit.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyFit {
    pub coeffs: Vec<f64>,
    pub r_squared: f64,
}

impl PolyFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

/// Least squares fit of degree `degree` through the normal equations.
/// Returns `None` when the system is singular (too few distinct points).
pub fn poly_fit(xs: &[f64], ys: &[f64], degree: usize) -> Option<PolyFit> {
    let m = degree + 1;
    if xs.len() != ys.len() || xs.len() < m {
        return None;
    }
    // augmented normal-equation matrix [X^T X | X^T y]
    let mut a = vec![vec![0.0; m + 1]; m];
    for (&x, &y) in xs.iter().zip(ys) {
        let pows: Vec<f64> = (0..m).map(|p| x.powi(p as i32)).collect();
        for i in 0..m {
            for j in 0..m {
                a[i][j] += pows[i] * pows[j];
            }
            a[i][m] += pows[i] * y;
        }
    }
    for col in 0..m {
        let pivot = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        for row in 0..m {
            if row != col {
                let f = a[row][col] / a[col][col];
                for c in col..=m {
                    a[row][c] -= f * a[col][c];
                }
            }
        }
    }
    let coeffs: Vec<f64> = (0..m).map(|i| a[i][m] / a[i][i]).collect();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let fit = PolyFit { coeffs, r_squared: 1.0 };
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(&x, &y)| (y - fit.eval(x)).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Some(PolyFit { r_squared, ..fit })
}
