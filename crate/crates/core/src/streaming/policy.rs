use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decoder::{GenerateLimits, Generation, TokenId};
use crate::encoder::WaveformSegment;
use crate::error::{bail, Result};

use super::clock::{Clock, Work};
use super::engine::SimulEngine;
use super::events::{Event, SessionEventLog};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    WaitKStrideN,
    HoldN,
}

/// Session policy, also accepted as JSON:
/// `{"kind":"wait_k_stride_n","k":2,"n":3}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Segments read before the first write (wait-k only).
    #[serde(default = "default_k")]
    pub k: usize,
    pub n: usize,
    #[serde(default = "default_segment_ms")]
    pub segment_ms: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens_per_write: usize,
}

fn default_k() -> usize {
    1
}

fn default_segment_ms() -> f64 {
    1000.0
}

fn default_max_tokens() -> usize {
    GenerateLimits::DEFAULT_MAX_TOKENS
}

impl PolicyConfig {
    pub fn wait_k(k: usize, n: usize) -> Self {
        Self {
            kind: PolicyKind::WaitKStrideN,
            k,
            n,
            segment_ms: default_segment_ms(),
            max_tokens_per_write: default_max_tokens(),
        }
    }

    pub fn hold_n(n: usize) -> Self {
        Self {
            kind: PolicyKind::HoldN,
            k: 1,
            ..Self::wait_k(1, n)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == PolicyKind::WaitKStrideN && self.k == 0 {
            bail!(InvalidConfig, "k must be >= 1");
        }
        if self.n == 0 {
            bail!(InvalidConfig, "n must be >= 1");
        }
        if !(self.segment_ms > 0.0 && self.segment_ms.is_finite()) {
            bail!(InvalidConfig, "segment_ms must be positive");
        }
        if self.max_tokens_per_write == 0 {
            bail!(InvalidConfig, "max_tokens_per_write must be >= 1");
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Result of one policy session.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionOutput {
    /// Committed translation.
    pub tokens: Vec<TokenId>,
    pub log: SessionEventLog,
    /// Full hypothesis after each read that decoded (hold-n only).
    pub hypotheses: Vec<Vec<TokenId>>,
    /// Work per read step, including the write that followed it.
    pub step_work: Vec<Work>,
}

/// Tokens to emit from a hold-n hypothesis: everything past the committed
/// prefix except the last `n` tokens.
pub fn hold_n_emission(committed: usize, hypothesis: &[TokenId], n: usize) -> &[TokenId] {
    let stable = hypothesis.len().saturating_sub(n);
    if stable <= committed {
        &[]
    } else {
        &hypothesis[committed..stable]
    }
}

struct Session<'a, E: SimulEngine> {
    engine: &'a mut E,
    clock: &'a mut Clock,
    cfg: &'a PolicyConfig,
    out: SessionOutput,
    words: crate::decoder::WordTracker,
    audio_ms: f64,
}

impl<'a, E: SimulEngine> Session<'a, E> {
    fn new(
        engine: &'a mut E,
        segments: &[WaveformSegment<E::Scalar>],
        cfg: &'a PolicyConfig,
        clock: &'a mut Clock,
        kind: PolicyKind,
    ) -> Result<Self> {
        cfg.validate()?;
        if cfg.kind != kind {
            bail!(InvalidConfig, "policy kind {:?} given to the {kind:?} runner", cfg.kind);
        }
        if segments.is_empty() {
            bail!(InvalidInput, "empty segment stream");
        }
        let words = engine.vocab().tracker();
        Ok(Self {
            engine,
            clock,
            cfg,
            out: SessionOutput {
                tokens: Vec::new(),
                log: SessionEventLog::new(),
                hypotheses: Vec::new(),
                step_work: Vec::new(),
            },
            words,
            audio_ms: 0.0,
        })
    }

    fn read(&mut self, index: usize, segment: &WaveformSegment<E::Scalar>) -> Result<()> {
        self.audio_ms = (index + 1) as f64 * self.cfg.segment_ms;
        self.clock.wait_until(self.audio_ms);
        self.out.log.push(Event::Read {
            t_wall_ms: self.clock.now_ms(),
            audio_ms: self.audio_ms,
            segment_index: index,
            padded: segment.padded(),
        });
        let work = self.engine.read(segment)?;
        self.clock.charge_work(&work)?;
        self.out.step_work.push(work);
        Ok(())
    }

    fn generate(&mut self, n_words: Option<usize>) -> Result<Generation> {
        let limits = GenerateLimits {
            n_words,
            max_tokens: self.cfg.max_tokens_per_write,
            suppress_eos: false,
        };
        let (gen, work) = self.engine.generate(&limits)?;
        self.clock.charge_work(&work)?;
        if let Some(w) = self.out.step_work.last_mut() {
            w.merge(&work);
        }
        Ok(gen)
    }

    /// Commits `tokens` and logs a WRITE unless empty. Returns true at EOS.
    fn write(&mut self, tokens: &[TokenId], last: bool) -> bool {
        if tokens.is_empty() {
            return false;
        }
        let mut words = tokens.iter().filter(|&&t| self.words.feed(t)).count();
        if last {
            words += usize::from(self.words.flush());
        }
        self.out.tokens.extend_from_slice(tokens);
        self.out.log.push(Event::Write {
            t_wall_ms: self.clock.now_ms(),
            audio_ms: self.audio_ms,
            tokens: tokens.to_vec(),
            words,
        });
        tokens.contains(&self.engine.vocab().eos)
    }
}

/// Reads `k` segments, then alternates writing `n` words and reading one
/// segment; after the last segment it writes until EOS or the token budget.
pub fn run_wait_k_stride_n<E: SimulEngine>(
    engine: &mut E,
    segments: &[WaveformSegment<E::Scalar>],
    cfg: &PolicyConfig,
    clock: &mut Clock,
) -> Result<SessionOutput> {
    let mut s = Session::new(engine, segments, cfg, clock, PolicyKind::WaitKStrideN)?;
    for (i, segment) in segments.iter().enumerate() {
        s.read(i, segment)?;
        if i + 1 < cfg.k && i + 1 < segments.len() {
            continue;
        }
        let last = i + 1 == segments.len();
        let gen = s.generate(if last { None } else { Some(cfg.n) })?;
        if s.write(&gen.tokens, last) {
            break;
        }
    }
    Ok(s.out)
}

/// After each segment decodes a full hypothesis, commits all but its last
/// `n` tokens and drops the rest from the decoder cache. The final segment
/// commits the whole hypothesis.
pub fn run_hold_n<E: SimulEngine>(
    engine: &mut E,
    segments: &[WaveformSegment<E::Scalar>],
    cfg: &PolicyConfig,
    clock: &mut Clock,
) -> Result<SessionOutput> {
    let mut s = Session::new(engine, segments, cfg, clock, PolicyKind::HoldN)?;
    for (i, segment) in segments.iter().enumerate() {
        s.read(i, segment)?;
        let last = i + 1 == segments.len();
        let gen = s.generate(None)?;
        let committed = s.out.tokens.len();
        let mut hypothesis = s.out.tokens.clone();
        hypothesis.extend_from_slice(&gen.tokens);
        let emit = if last {
            gen.tokens.clone()
        } else {
            hold_n_emission(committed, &hypothesis, cfg.n).to_vec()
        };
        s.engine.retain(emit.len())?;
        s.out.hypotheses.push(hypothesis);
        if s.write(&emit, last) {
            break;
        }
    }
    Ok(s.out)
}

/// Dispatches on `cfg.kind`.
pub fn run_policy<E: SimulEngine>(
    engine: &mut E,
    segments: &[WaveformSegment<E::Scalar>],
    cfg: &PolicyConfig,
    clock: &mut Clock,
) -> Result<SessionOutput> {
    match cfg.kind {
        PolicyKind::WaitKStrideN => run_wait_k_stride_n(engine, segments, cfg, clock),
        PolicyKind::HoldN => run_hold_n(engine, segments, cfg, clock),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hold_n_discard_rule() {
        assert_eq!(hold_n_emission(0, &[10, 11, 12, 13], 2), &[10, 11]);
        assert_eq!(hold_n_emission(2, &[10, 11, 14, 15, 16], 2), &[14]);
        assert!(hold_n_emission(0, &[10, 11], 2).is_empty());
        assert!(hold_n_emission(3, &[10, 11, 12, 13], 2).is_empty());
    }

    #[test]
    fn config_json_defaults() {
        let cfg: PolicyConfig = serde_json::from_str(r#"{"kind":"wait_k_stride_n","k":2,"n":3}"#).unwrap();
        assert_eq!(cfg, PolicyConfig::wait_k(2, 3));
        assert!(PolicyConfig::wait_k(0, 1).validate().is_err());
        assert!(PolicyConfig::hold_n(0).validate().is_err());
    }
}
