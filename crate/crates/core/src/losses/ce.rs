use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::decoder::TokenId;
use crate::error::{bail, Result};
use crate::tensor::{Matrix, Real};

fn check_targets<T: Real>(logits: &Matrix<T>, targets: &[TokenId]) -> Result<()> {
    if logits.rows() != targets.len() || targets.is_empty() {
        bail!(InvalidArgument, "{} logit rows for {} targets", logits.rows(), targets.len());
    }
    if let Some(&bad) = targets.iter().find(|&&t| t as usize >= logits.cols()) {
        bail!(InvalidTarget, "target {bad} outside vocabulary of {}", logits.cols());
    }
    Ok(())
}

/// Mean negative log-likelihood of `targets` under row-wise softmax of
/// `logits` (teacher-forced rows, already computed under the policy mask).
pub fn masked_ce<T: Real>(logits: &Matrix<T>, targets: &[TokenId]) -> Result<T> {
    Ok(masked_ce_grad(logits, targets)?.0)
}

/// [`masked_ce`] and its gradient with respect to the logits.
pub fn masked_ce_grad<T: Real>(logits: &Matrix<T>, targets: &[TokenId]) -> Result<(T, Matrix<T>)> {
    check_targets(logits, targets)?;
    let n = T::from_usize(targets.len()).unwrap();
    let mut loss = T::zero();
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    for (r, &t) in targets.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let total: T = row.iter().map(|&x| (x - max).exp()).sum();
        loss = loss + (total.ln() + max - row[t as usize]);
        for (c, g) in grad.row_mut(r).iter_mut().enumerate() {
            let p = (row[c] - max).exp() / total;
            let hot = if c == t as usize { T::one() } else { T::zero() };
            *g = (p - hot) / n;
        }
    }
    Ok((loss / n, grad))
}

/// Seeded uniform sampler over a set of wait counts.
#[derive(Clone, Debug)]
pub struct KSampler {
    choices: Vec<usize>,
    rng: ChaCha8Rng,
}

impl KSampler {
    pub fn new(choices: &[usize], seed: u64) -> Result<Self> {
        if choices.is_empty() {
            bail!(InvalidConfig, "empty set of k values");
        }
        Ok(Self {
            choices: choices.to_vec(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn next_k(&mut self) -> usize {
        *self.choices.choose(&mut self.rng).unwrap()
    }
}

/// One draw from `choices` for the given seed.
pub fn sample_k(choices: &[usize], seed: u64) -> Result<usize> {
    Ok(KSampler::new(choices, seed)?.next_k())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_v() {
        let logits = Matrix::<f64>::zeros(3, 8);
        let loss = masked_ce(&logits, &[0, 5, 7]).unwrap();
        assert!((loss - 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_logits_give_zero() {
        let mut logits = Matrix::<f64>::zeros(2, 4);
        logits.set(0, 1, 1e6);
        logits.set(1, 3, 1e6);
        assert!(masked_ce(&logits, &[1, 3]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn bad_targets() {
        let logits = Matrix::<f64>::zeros(1, 4);
        assert!(matches!(masked_ce(&logits, &[4]), Err(crate::Error::InvalidTarget(_))));
        assert!(masked_ce(&logits, &[0, 1]).is_err());
    }

    #[test]
    fn k_sampling() {
        assert_eq!(sample_k(&[3], 9).unwrap(), 3);
        assert!(matches!(sample_k(&[], 0), Err(crate::Error::InvalidConfig(_))));
        let set = [1, 2, 3, 4, 5, 100];
        let draw = |seed| {
            let mut s = KSampler::new(&set, seed).unwrap();
            (0..20).map(|_| s.next_k()).collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }
}
