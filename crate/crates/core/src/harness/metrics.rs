use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::streaming::{Event, SessionEventLog};
use crate::FORMAT_VERSION;

/// Which delay a latency figure is computed from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DelayMode {
    /// Audio read when the word was written.
    NonComputationAware,
    /// Wall time when the word was written, including computation.
    ComputationAware,
}

/// Per-word delays of one session.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayProfile {
    pub d_nca: Vec<f64>,
    pub d_ca: Vec<f64>,
    /// Source duration in ms.
    pub source_ms: f64,
    pub ref_len: usize,
}

impl DelayProfile {
    pub fn hyp_len(&self) -> usize {
        self.d_nca.len()
    }

    pub fn delays(&self, mode: DelayMode) -> &[f64] {
        match mode {
            DelayMode::NonComputationAware => &self.d_nca,
            DelayMode::ComputationAware => &self.d_ca,
        }
    }
}

/// Assigns every word of every WRITE the audio time of the latest READ and
/// the wall time of the WRITE. The source duration is the audio read in total.
pub fn delays_from_log(log: &SessionEventLog, ref_len: usize) -> Result<DelayProfile> {
    log.validate()?;
    let mut profile = DelayProfile {
        d_nca: Vec::new(),
        d_ca: Vec::new(),
        source_ms: 0.0,
        ref_len,
    };
    let mut audio = 0.0;
    for event in &log.events {
        match *event {
            Event::Read { audio_ms, .. } => audio = audio_ms,
            Event::Write { t_wall_ms, words, .. } => {
                profile.d_nca.extend(std::iter::repeat(audio).take(words));
                profile.d_ca.extend(std::iter::repeat(t_wall_ms).take(words));
            }
        }
    }
    profile.source_ms = audio;
    Ok(profile)
}

/// Length-adaptive average lagging.
///
/// With `r = T / max(hyp_len, ref_len)` and `tau` the first word whose
/// non-computation-aware delay reaches `T` (or the last word), returns
/// `mean over i < tau of d_i - i * r` (0-based `i`).
pub fn laal(profile: &DelayProfile, mode: DelayMode) -> Result<f64> {
    let t = profile.source_ms;
    if !(t > 0.0 && t.is_finite()) {
        bail!(InvalidProfile, "source duration must be positive, got {t}");
    }
    let hyp = profile.hyp_len();
    if hyp == 0 {
        bail!(InvalidProfile, "no words emitted");
    }
    if profile.d_ca.len() != hyp {
        bail!(InvalidProfile, "delay vectors differ in length");
    }
    let r = t / hyp.max(profile.ref_len) as f64;
    let tau = profile.d_nca.iter().position(|&d| d >= t).map_or(hyp, |i| i + 1);
    let delays = profile.delays(mode);
    let sum: f64 = (0..tau).map(|i| delays[i] - i as f64 * r).sum();
    Ok(sum / tau as f64)
}

/// Contents of the metrics file written by `eval`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub format_version: u32,
    pub bleu_lite: f64,
    pub laal_ms: f64,
    pub laal_ca_ms: f64,
    pub words: usize,
    pub segments: usize,
    #[serde(rename = "T_ms")]
    pub t_ms: f64,
}

impl MetricsReport {
    pub fn compute(log: &SessionEventLog, hypothesis: &[u32], reference: &[u32], ref_words: usize) -> Result<Self> {
        let profile = delays_from_log(log, ref_words)?;
        Ok(Self {
            format_version: FORMAT_VERSION,
            bleu_lite: super::bleu_lite(hypothesis, reference, 4)?,
            laal_ms: laal(&profile, DelayMode::NonComputationAware)?,
            laal_ca_ms: laal(&profile, DelayMode::ComputationAware)?,
            words: profile.hyp_len(),
            segments: log.reads(),
            t_ms: profile.source_ms,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(d: &[f64], t: f64, ref_len: usize) -> DelayProfile {
        DelayProfile {
            d_nca: d.to_vec(),
            d_ca: d.to_vec(),
            source_ms: t,
            ref_len,
        }
    }

    #[test]
    fn worked_examples() {
        let nca = DelayMode::NonComputationAware;
        assert_eq!(laal(&profile(&[1000.0, 2000.0, 3000.0], 3000.0, 3), nca).unwrap(), 1000.0);
        assert_eq!(laal(&profile(&[3000.0], 3000.0, 1), nca).unwrap(), 3000.0);
        assert_eq!(laal(&profile(&[1000.0, 2000.0, 3000.0], 3000.0, 6), nca).unwrap(), 1500.0);
    }

    #[test]
    fn cutoff_at_source_end() {
        // words after the first one at T are ignored
        let p = profile(&[1000.0, 3000.0, 3000.0, 3000.0], 3000.0, 4);
        assert_eq!(laal(&p, DelayMode::NonComputationAware).unwrap(), (1000.0 + 2250.0) / 2.0);
    }

    #[test]
    fn invalid_profiles() {
        assert!(matches!(
            laal(&profile(&[1.0], 0.0, 1), DelayMode::ComputationAware),
            Err(crate::Error::InvalidProfile(_))
        ));
        assert!(laal(&profile(&[], 10.0, 1), DelayMode::ComputationAware).is_err());
    }

    #[test]
    fn log_delays() {
        let mut log = SessionEventLog::new();
        log.push(Event::Read {
            t_wall_ms: 1000.0,
            audio_ms: 1000.0,
            segment_index: 0,
            padded: false,
        });
        log.push(Event::Write {
            t_wall_ms: 1050.0,
            audio_ms: 1000.0,
            tokens: vec![4, 2, 5, 2],
            words: 2,
        });
        let p = delays_from_log(&log, 2).unwrap();
        assert_eq!(p.d_nca, vec![1000.0, 1000.0]);
        assert_eq!(p.d_ca, vec![1050.0, 1050.0]);
        assert_eq!(p.source_ms, 1000.0);

        let mut bad = SessionEventLog::new();
        bad.push(log.events[1].clone());
        assert!(matches!(delays_from_log(&bad, 1), Err(crate::Error::InvalidLog(_))));
    }
}
