#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simulst::decoder::{Modality, TokenId, WordRule};
use simulst::encoder::WaveformSegment;
use simulst::{Matrix, Model, ModelConfig, Real};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small model shape; block size drawn from {4, 8, 12}.
pub fn small_config(rng: &mut ChaCha8Rng) -> ModelConfig {
    let enc_heads = *[1, 2, 4].choose(rng).unwrap();
    let dec_heads = *[1, 2].choose(rng).unwrap();
    let d_enc = enc_heads * *[4, 8].choose(rng).unwrap();
    let d_model = dec_heads * *[8, 12].choose(rng).unwrap();
    ModelConfig {
        d_feat: 12,
        d_enc,
        enc_layers: rng.gen_range(1..=2),
        enc_heads,
        enc_ffn: 3 * d_enc,
        block_size: *[4, 8, 12].choose(rng).unwrap(),
        d_model,
        dec_layers: rng.gen_range(1..=2),
        dec_heads,
        dec_ffn: 3 * d_model,
        vocab_size: rng.gen_range(6..=20),
        ..ModelConfig::default()
    }
}

pub fn noise<T: Real>(rng: &mut ChaCha8Rng, cfg: &ModelConfig, segments: usize) -> Vec<WaveformSegment<T>> {
    let samples: Vec<T> = (0..segments * cfg.segment_samples())
        .map(|_| T::from_f64_lossy(rng.gen_range(-1.0..1.0)))
        .collect();
    WaveformSegment::split(&samples, cfg.segment_samples()).unwrap()
}

pub fn uniform<T: Real>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<T> {
    Matrix::from_fn(rows, cols, |_, _| T::from_f64_lossy(rng.gen_range(-1.0..1.0)))
}

/// Model whose every generation step emits `token`.
pub fn pinned<T: Real>(rule: WordRule, token: TokenId, seed: u64) -> Model<T> {
    let mut m = Model::random(ModelConfig::default(), rule, seed).unwrap();
    m.pin_output(token).unwrap();
    m
}

/// Consistency rule written out directly: causal, and speech queries only
/// see speech keys.
pub fn consistency_oracle(flags: &[Modality]) -> simulst::tensor::AttentionMask {
    simulst::tensor::AttentionMask::from_fn(flags.len(), flags.len(), |q, k| {
        k <= q && (flags[q] == Modality::Text || flags[k] == Modality::Speech)
    })
}

/// Least-squares fit `y = c0 + c1 x + c2 x^2` (or affine when `quadratic`
/// is false) by Gaussian elimination; returns coefficients and R^2.
pub fn least_squares(xs: &[f64], ys: &[f64], quadratic: bool) -> (Vec<f64>, f64) {
    let m = if quadratic { 3 } else { 2 };
    let mut a = vec![vec![0.0; m + 1]; m];
    for (&x, &y) in xs.iter().zip(ys) {
        let basis = [1.0, x, x * x];
        for i in 0..m {
            for j in 0..m {
                a[i][j] += basis[i] * basis[j];
            }
            a[i][m] += basis[i] * y;
        }
    }
    for c in 0..m {
        let p = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        for r in 0..m {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=m {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    let coef: Vec<f64> = (0..m).map(|i| a[i][m] / a[i][i]).collect();
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let pred = |x: f64| coef.iter().enumerate().map(|(p, c)| c * x.powi(p as i32)).sum::<f64>();
    let ss_res: f64 = xs.iter().zip(ys).map(|(&x, &y)| (y - pred(x)).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    (coef, 1.0 - ss_res / ss_tot)
}
