//! Flat weight files and the seeded initializer.
//!
//! A weight file is a pair: a binary blob of little-endian `f32` values and a
//! JSON manifest
//!
//! ```json
//! {"format_version": 1,
//!  "tensors": [{"name": "enc.layer0.wq", "shape": [64, 64], "offset": 0}]}
//! ```
//!
//! where `offset` is a byte offset into the blob. Tensors are stored in
//! row-major order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::FORMAT_VERSION;

use super::{Matrix, Real};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WeightManifest {
    pub format_version: u32,
    pub tensors: Vec<TensorEntry>,
}

/// Named `f32` tensors, ordered by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    tensors: BTreeMap<String, (Vec<usize>, Vec<f32>)>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn insert_matrix<T: Real>(&mut self, name: &str, m: &Matrix<T>) {
        let data = m.data().iter().map(|v| v.to_f32().unwrap_or(f32::NAN)).collect();
        self.tensors
            .insert(name.to_string(), (vec![m.rows(), m.cols()], data));
    }

    pub fn insert_vector<T: Real>(&mut self, name: &str, v: &[T]) {
        let data = v.iter().map(|v| v.to_f32().unwrap_or(f32::NAN)).collect();
        self.tensors.insert(name.to_string(), (vec![v.len()], data));
    }

    pub fn matrix<T: Real>(&self, name: &str) -> Result<Matrix<T>> {
        let (shape, data) = self.entry(name)?;
        let (rows, cols) = match shape.as_slice() {
            [r, c] => (*r, *c),
            [n] => (1, *n),
            _ => bail!(InvalidArgument, "tensor {name} has rank {}", shape.len()),
        };
        Matrix::from_vec(rows, cols, data.iter().map(|&v| T::from_f64_lossy(v as f64)).collect())
    }

    pub fn vector<T: Real>(&self, name: &str) -> Result<Vec<T>> {
        let (_, data) = self.entry(name)?;
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            bail!(InvalidArgument, "tensor {name} has non-finite entry at {i}");
        }
        Ok(data.iter().map(|&v| T::from_f64_lossy(v as f64)).collect())
    }

    fn entry(&self, name: &str) -> Result<&(Vec<usize>, Vec<f32>)> {
        match self.tensors.get(name) {
            Some(e) => Ok(e),
            None => bail!(InvalidArgument, "missing tensor {name}"),
        }
    }

    pub fn to_bytes(&self) -> (Vec<u8>, WeightManifest) {
        let mut blob = Vec::new();
        let mut tensors = Vec::with_capacity(self.tensors.len());
        for (name, (shape, data)) in &self.tensors {
            tensors.push(TensorEntry {
                name: name.clone(),
                shape: shape.clone(),
                offset: blob.len(),
            });
            for v in data {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        }
        let manifest = WeightManifest {
            format_version: FORMAT_VERSION,
            tensors,
        };
        (blob, manifest)
    }

    pub fn from_bytes(blob: &[u8], manifest: &WeightManifest) -> Result<Self> {
        if manifest.format_version != FORMAT_VERSION {
            bail!(
                InvalidInput,
                "unsupported weight format version {}",
                manifest.format_version
            );
        }
        let mut store = WeightStore::new();
        for t in &manifest.tensors {
            let count: usize = t.shape.iter().product();
            let end = t.offset + count * 4;
            if end > blob.len() {
                bail!(
                    InvalidInput,
                    "tensor {} spans bytes {}..{end} beyond blob of {}",
                    t.name,
                    t.offset,
                    blob.len()
                );
            }
            let data = blob[t.offset..end]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            store.tensors.insert(t.name.clone(), (t.shape.clone(), data));
        }
        Ok(store)
    }

    pub fn save(&self, blob_path: &Path, manifest_path: &Path) -> Result<()> {
        let (blob, manifest) = self.to_bytes();
        fs::write(blob_path, blob)?;
        fs::write(manifest_path, serde_json::to_vec_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(blob_path: &Path, manifest_path: &Path) -> Result<Self> {
        let manifest: WeightManifest = serde_json::from_slice(&fs::read(manifest_path)?)?;
        Self::from_bytes(&fs::read(blob_path)?, &manifest)
    }
}

/// Deterministic toy-weight generator.
///
/// Draws from a ChaCha8 stream seeded with `seed` (via
/// `SeedableRng::seed_from_u64`). Matrices are filled row-major with values
/// uniform in `[-a, a]`, `a = gain * sqrt(3 / fan_in)`, so entries have
/// variance `gain^2 / fan_in`.
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform<T: Real>(&mut self, rows: usize, cols: usize, bound: f64) -> Matrix<T> {
        Matrix::from_fn(rows, cols, |_, _| {
            T::from_f64_lossy(self.rng.gen_range(-bound..=bound))
        })
    }

    /// `[fan_in x fan_out]` weight with the scaled-uniform rule above.
    pub fn weight<T: Real>(&mut self, fan_in: usize, fan_out: usize, gain: f64) -> Matrix<T> {
        let bound = gain * (3.0 / fan_in.max(1) as f64).sqrt();
        self.uniform(fan_in, fan_out, bound)
    }

    pub fn vector<T: Real>(&mut self, len: usize, bound: f64) -> Vec<T> {
        (0..len)
            .map(|_| T::from_f64_lossy(self.rng.gen_range(-bound..=bound)))
            .collect()
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
