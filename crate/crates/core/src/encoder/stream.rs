use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::tensor::Real;

/// One fixed-length chunk of waveform.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveformSegment<T = f32> {
    samples: Vec<T>,
    /// Samples that came from the stream; the rest is zero padding.
    original_len: usize,
}

impl<T: Real> WaveformSegment<T> {
    /// Wraps `samples`, zero-padding a short final chunk up to `segment_samples`.
    pub fn new(mut samples: Vec<T>, segment_samples: usize) -> Result<Self> {
        if samples.is_empty() {
            bail!(InvalidSegment, "empty segment");
        }
        if samples.len() > segment_samples {
            bail!(
                InvalidSegment,
                "segment of {} samples exceeds {segment_samples}",
                samples.len()
            );
        }
        if samples.iter().any(|v| !v.is_finite()) {
            bail!(InvalidSegment, "non-finite sample");
        }
        let original_len = samples.len();
        samples.resize(segment_samples, T::zero());
        Ok(Self {
            samples,
            original_len,
        })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len()
    }

    pub fn padded(&self) -> bool {
        self.original_len < self.samples.len()
    }

    pub fn original_len(&self) -> usize {
        self.original_len
    }

    /// Cuts a waveform into equal segments; the last one is zero-padded.
    pub fn split(samples: &[T], segment_samples: usize) -> Result<Vec<Self>> {
        if samples.is_empty() {
            bail!(InvalidInput, "empty waveform");
        }
        if segment_samples == 0 {
            bail!(InvalidConfig, "segment length must be >= 1");
        }
        samples
            .chunks(segment_samples)
            .map(|c| Self::new(c.to_vec(), segment_samples))
            .collect()
    }
}

/// Where a manifest segment's samples live.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SegmentSource {
    /// Raw little-endian `f32` file, relative to the manifest directory.
    Path(PathBuf),
    Inline(Vec<f32>),
}

/// Stream input description.
///
/// ```json
/// {"format_version": 1, "sample_rate": 16000, "segment_samples": 128,
///  "segments": ["seg0.f32", [0.0, 0.1, ...]]}
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamManifest {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub sample_rate: u32,
    pub segment_samples: usize,
    pub segments: Vec<SegmentSource>,
}

fn format_version() -> u32 {
    crate::FORMAT_VERSION
}

impl StreamManifest {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    /// Loads every segment, resolving relative paths against `base_dir`.
    pub fn load_segments<T: Real>(&self, base_dir: &Path) -> Result<Vec<WaveformSegment<T>>> {
        if self.segments.is_empty() {
            bail!(InvalidInput, "stream has no segments");
        }
        self.segments
            .iter()
            .map(|src| {
                let raw = match src {
                    SegmentSource::Inline(v) => v.clone(),
                    SegmentSource::Path(p) => read_f32_le(&base_dir.join(p))?,
                };
                WaveformSegment::new(
                    raw.into_iter().map(|v| T::from_f64_lossy(v as f64)).collect(),
                    self.segment_samples,
                )
            })
            .collect()
    }
}

pub fn read_f32_le(path: &Path) -> Result<Vec<f32>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 4 != 0 {
        bail!(InvalidInput, "{} is not a whole number of f32 values", path.display());
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

pub fn write_f32_le(path: &Path, samples: &[f32]) -> Result<()> {
    let bytes: Vec<u8> = samples.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn final_segment_is_padded() {
        let samples: Vec<f32> = (0..10).map(|i| i as f32).collect();
        let segs = WaveformSegment::split(&samples, 4).unwrap();
        assert_eq!(segs.len(), 3);
        assert!(!segs[0].padded());
        assert!(segs[2].padded());
        assert_eq!(segs[2].samples(), &[8.0, 9.0, 0.0, 0.0]);
        assert!(WaveformSegment::<f32>::new(vec![0.0; 5], 4).is_err());
    }

    #[test]
    fn manifest_with_files_and_inline() {
        let dir = tempfile::tempdir().unwrap();
        write_f32_le(&dir.path().join("a.f32"), &[1.0, 2.0]).unwrap();
        let text = r#"{"sample_rate": 16000, "segment_samples": 2,
                       "segments": ["a.f32", [3.0]]}"#;
        let m: StreamManifest = serde_json::from_str(text).unwrap();
        assert_eq!(m.format_version, 1);
        let segs = m.load_segments::<f64>(dir.path()).unwrap();
        assert_eq!(segs[0].samples(), &[1.0, 2.0]);
        assert_eq!(segs[1].samples(), &[3.0, 0.0]);
    }
}
