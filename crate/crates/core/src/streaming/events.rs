//! Session event log, serialized as JSON lines:
//!
//! ```text
//! {"format_version":1,"type":"read","t_wall_ms":1000.0,"audio_ms":1000.0,"segment_index":0}
//! {"format_version":1,"type":"write","t_wall_ms":1042.5,"audio_ms":1000.0,"tokens":[5,2],"words":1}
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decoder::TokenId;
use crate::error::{bail, Result};
use crate::FORMAT_VERSION;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Read {
        t_wall_ms: f64,
        /// Audio received so far, including this segment.
        audio_ms: f64,
        segment_index: usize,
        /// Set when the segment was zero-padded to full length.
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        padded: bool,
    },
    Write {
        t_wall_ms: f64,
        /// Audio received when the write happened.
        audio_ms: f64,
        tokens: Vec<TokenId>,
        words: usize,
    },
}

impl Event {
    pub fn t_wall_ms(&self) -> f64 {
        match self {
            Event::Read { t_wall_ms, .. } | Event::Write { t_wall_ms, .. } => *t_wall_ms,
        }
    }

    pub fn is_read(&self) -> bool {
        matches!(self, Event::Read { .. })
    }
}

#[derive(Serialize, Deserialize)]
struct Line {
    format_version: u32,
    #[serde(flatten)]
    event: Event,
}

/// Ordered READ/WRITE events of one session.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SessionEventLog {
    pub events: Vec<Event>,
}

impl SessionEventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: Event) {
        self.events.push(event);
    }

    pub fn reads(&self) -> usize {
        self.events.iter().filter(|e| e.is_read()).count()
    }

    pub fn writes(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| !e.is_read())
    }

    /// All emitted tokens in order.
    pub fn tokens(&self) -> Vec<TokenId> {
        self.events
            .iter()
            .flat_map(|e| match e {
                Event::Write { tokens, .. } => tokens.clone(),
                Event::Read { .. } => Vec::new(),
            })
            .collect()
    }

    /// Checks ordering invariants: starts with a READ, wall time never goes
    /// back, audio strictly grows across READs.
    pub fn validate(&self) -> Result<()> {
        match self.events.first() {
            None => bail!(InvalidLog, "empty log"),
            Some(e) if !e.is_read() => bail!(InvalidLog, "first event is not a READ"),
            _ => {}
        }
        let mut wall = f64::NEG_INFINITY;
        let mut audio = f64::NEG_INFINITY;
        for (i, e) in self.events.iter().enumerate() {
            let t = e.t_wall_ms();
            if !t.is_finite() || t < wall {
                bail!(InvalidLog, "event {i}: wall time {t} goes backwards");
            }
            wall = t;
            match e {
                Event::Read { audio_ms, .. } => {
                    if *audio_ms <= audio {
                        bail!(InvalidLog, "event {i}: audio time does not increase");
                    }
                    audio = *audio_ms;
                }
                Event::Write { audio_ms, .. } => {
                    if *audio_ms != audio {
                        bail!(InvalidLog, "event {i}: write audio {audio_ms} != last read {audio}");
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for event in &self.events {
            let line = Line {
                format_version: FORMAT_VERSION,
                event: event.clone(),
            };
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut events = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let line: Line = serde_json::from_str(raw)?;
            if line.format_version != FORMAT_VERSION {
                bail!(InvalidLog, "line {}: unsupported format version {}", i + 1, line.format_version);
            }
            events.push(line.event);
        }
        Ok(Self { events })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_jsonl(&fs::read_to_string(path)?)
    }
}
