use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

pub type TokenId = u32;

/// How emitted tokens group into words.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordRule {
    /// `word_sep` closes a word; `eos` closes a pending partial word.
    #[default]
    Separator,
    /// Every ordinary token is a word of its own.
    EveryToken,
}

/// Toy vocabulary description.
///
/// File form: `{"size": 32, "bos": 0, "eos": 1, "word_sep": 2,
/// "tokens": [...], "word_rule": "separator"}` with `tokens` and
/// `word_rule` optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub size: usize,
    pub bos: TokenId,
    pub eos: TokenId,
    pub word_sep: TokenId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
    #[serde(default)]
    pub word_rule: WordRule,
}

impl Vocabulary {
    pub fn new(size: usize, word_rule: WordRule) -> Result<Self> {
        let v = Self {
            size,
            bos: 0,
            eos: 1,
            word_sep: 2,
            tokens: None,
            word_rule,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 4 {
            bail!(InvalidConfig, "vocabulary size {} < 4", self.size);
        }
        let ids = [self.bos, self.eos, self.word_sep];
        if ids.iter().any(|&i| i as usize >= self.size) {
            bail!(InvalidConfig, "reserved id outside vocabulary");
        }
        if self.bos == self.eos || self.bos == self.word_sep || self.eos == self.word_sep {
            bail!(InvalidConfig, "reserved ids must be distinct");
        }
        if let Some(t) = &self.tokens {
            if t.len() != self.size {
                bail!(InvalidConfig, "{} token strings for size {}", t.len(), self.size);
            }
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let v: Self = serde_json::from_slice(&fs::read(path)?)?;
        v.validate()?;
        Ok(v)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn check(&self, token: TokenId) -> Result<()> {
        if token as usize >= self.size {
            bail!(InvalidTarget, "token {token} outside vocabulary of {}", self.size);
        }
        Ok(())
    }

    /// Human-readable rendering; unnamed tokens print as `<id>`.
    pub fn render(&self, tokens: &[TokenId]) -> String {
        let mut out = String::new();
        for &t in tokens {
            if t == self.eos || t == self.bos {
                continue;
            }
            if t == self.word_sep {
                out.push(' ');
                continue;
            }
            match &self.tokens {
                Some(names) => out.push_str(&names[t as usize]),
                None => out.push_str(&format!("<{t}>")),
            }
            if self.word_rule == WordRule::EveryToken {
                out.push(' ');
            }
        }
        out.trim_end().to_string()
    }

    pub fn tracker(&self) -> WordTracker {
        WordTracker {
            rule: self.word_rule,
            eos: self.eos,
            bos: self.bos,
            sep: self.word_sep,
            partial: false,
        }
    }

    /// Complete words in `tokens`, counting a trailing partial word when
    /// `flush` is set.
    pub fn count_words(&self, tokens: &[TokenId], flush: bool) -> usize {
        let mut t = self.tracker();
        let n = tokens.iter().filter(|&&tok| t.feed(tok)).count();
        n + usize::from(flush && t.flush())
    }
}

/// Incremental word-boundary detector.
#[derive(Clone, Debug)]
pub struct WordTracker {
    rule: WordRule,
    eos: TokenId,
    bos: TokenId,
    sep: TokenId,
    partial: bool,
}

impl WordTracker {
    /// Feeds one token; returns true when it completes a word.
    pub fn feed(&mut self, token: TokenId) -> bool {
        if token == self.bos {
            return false;
        }
        if token == self.eos {
            return std::mem::take(&mut self.partial);
        }
        match self.rule {
            WordRule::EveryToken => true,
            WordRule::Separator if token == self.sep => {
                self.partial = false;
                true
            }
            WordRule::Separator => {
                self.partial = true;
                false
            }
        }
    }

    /// Ends the stream; true if a partial word was pending.
    pub fn flush(&mut self) -> bool {
        std::mem::take(&mut self.partial)
    }

    pub fn in_word(&self) -> bool {
        self.partial
    }
}
