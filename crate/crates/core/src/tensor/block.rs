use crate::error::Result;

use super::weights::{Initializer, WeightStore};
use super::{gelu, LayerNorm, Linear, Macs, Matrix, Real};

/// Pre-norm transformer layer with a GELU feed-forward block.
#[derive(Clone, Debug)]
pub struct TransformerLayer<T = f32> {
    pub norm1: LayerNorm<T>,
    pub wq: Linear<T>,
    pub wk: Linear<T>,
    pub wv: Linear<T>,
    pub wo: Linear<T>,
    pub norm2: LayerNorm<T>,
    pub ff1: Linear<T>,
    pub ff2: Linear<T>,
}

impl<T: Real> TransformerLayer<T> {
    pub fn random(init: &mut Initializer, d: usize, ffn: usize) -> Self {
        let lin = |init: &mut Initializer, i, o| Linear::new(init.weight(i, o, 1.0), Some(init.vector(o, 0.02))).unwrap();
        Self {
            norm1: LayerNorm::new(vec![T::one(); d], vec![T::zero(); d]).unwrap(),
            wq: lin(init, d, d),
            wk: lin(init, d, d),
            wv: lin(init, d, d),
            wo: lin(init, d, d),
            norm2: LayerNorm::new(vec![T::one(); d], vec![T::zero(); d]).unwrap(),
            ff1: lin(init, d, ffn),
            ff2: lin(init, ffn, d),
        }
    }

    /// Projects queries, keys, values of the normalized input.
    pub fn qkv(&self, x: &Matrix<T>, macs: &mut Macs) -> Result<(Matrix<T>, Matrix<T>, Matrix<T>)> {
        let h = self.norm1.forward(x)?;
        Ok((
            self.wq.forward(&h, macs)?,
            self.wk.forward(&h, macs)?,
            self.wv.forward(&h, macs)?,
        ))
    }

    /// Residual attention output plus the feed-forward block.
    pub fn finish(&self, x: &Matrix<T>, attn: &Matrix<T>, macs: &mut Macs) -> Result<Matrix<T>> {
        let x = x.add(&self.wo.forward(attn, macs)?)?;
        let h = self.norm2.forward(&x)?;
        let h = self.ff1.forward(&h, macs)?.map(gelu);
        x.add(&self.ff2.forward(&h, macs)?)
    }

    pub fn store(&self, p: &str, s: &mut WeightStore) {
        store_norm(&self.norm1, &format!("{p}.norm1"), s);
        store_norm(&self.norm2, &format!("{p}.norm2"), s);
        for (name, l) in [
            ("wq", &self.wq),
            ("wk", &self.wk),
            ("wv", &self.wv),
            ("wo", &self.wo),
            ("ff1", &self.ff1),
            ("ff2", &self.ff2),
        ] {
            store_linear(l, &format!("{p}.{name}"), s);
        }
    }

    pub fn load(s: &WeightStore, p: &str) -> Result<Self> {
        Ok(Self {
            norm1: load_norm(s, &format!("{p}.norm1"))?,
            wq: load_linear(s, &format!("{p}.wq"))?,
            wk: load_linear(s, &format!("{p}.wk"))?,
            wv: load_linear(s, &format!("{p}.wv"))?,
            wo: load_linear(s, &format!("{p}.wo"))?,
            norm2: load_norm(s, &format!("{p}.norm2"))?,
            ff1: load_linear(s, &format!("{p}.ff1"))?,
            ff2: load_linear(s, &format!("{p}.ff2"))?,
        })
    }
}

pub fn store_linear<T: Real>(l: &Linear<T>, p: &str, s: &mut WeightStore) {
    s.insert_matrix(&format!("{p}.weight"), &l.weight);
    if let Some(b) = &l.bias {
        s.insert_vector(&format!("{p}.bias"), b);
    }
}

pub fn load_linear<T: Real>(s: &WeightStore, p: &str) -> Result<Linear<T>> {
    let weight = s.matrix(&format!("{p}.weight"))?;
    let bias = s.vector(&format!("{p}.bias")).ok();
    Linear::new(weight, bias)
}

pub fn store_norm<T: Real>(n: &LayerNorm<T>, p: &str, s: &mut WeightStore) {
    s.insert_vector(&format!("{p}.gain"), &n.gain);
    s.insert_vector(&format!("{p}.shift"), &n.shift);
}

pub fn load_norm<T: Real>(s: &WeightStore, p: &str) -> Result<LayerNorm<T>> {
    LayerNorm::new(s.vector(&format!("{p}.gain"))?, s.vector(&format!("{p}.shift"))?)
}

