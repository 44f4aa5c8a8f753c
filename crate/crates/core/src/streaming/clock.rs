use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

/// Billable operation classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Extract,
    Encode,
    Adapt,
    /// Feeding speech rows to the decoder (or rebuilding its cache).
    Prefill,
    Generate,
}

impl OpKind {
    pub const ALL: [OpKind; 5] = [
        OpKind::Extract,
        OpKind::Encode,
        OpKind::Adapt,
        OpKind::Prefill,
        OpKind::Generate,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// Multiply-accumulate counts split by operation class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Work {
    macs: [u64; 5],
}

impl Work {
    pub fn add(&mut self, kind: OpKind, macs: u64) {
        self.macs[kind.index()] += macs;
    }

    pub fn get(&self, kind: OpKind) -> u64 {
        self.macs[kind.index()]
    }

    pub fn total(&self) -> u64 {
        self.macs.iter().sum()
    }

    pub fn merge(&mut self, other: &Work) {
        for (a, b) in self.macs.iter_mut().zip(other.macs) {
            *a += b;
        }
    }
}

/// Simulated cost in milliseconds per unit of work (one unit is one million
/// multiply-accumulates when charged from [`Work`]).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub ms_per_unit: BTreeMap<OpKind, f64>,
}

impl CostTable {
    /// Same rate for every operation class.
    pub fn uniform(rate: f64) -> Self {
        Self {
            ms_per_unit: OpKind::ALL.iter().map(|&k| (k, rate)).collect(),
        }
    }

    pub fn zero() -> Self {
        Self::uniform(0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            ms_per_unit: self.ms_per_unit.iter().map(|(&k, &r)| (k, r * factor)).collect(),
        }
    }
}

/// Session time source.
///
/// `Simulated` advances only through [`Clock::charge`] and waiting for
/// audio. `Real` measures elapsed wall time and jumps forward instead of
/// sleeping when the session is idle waiting for audio.
#[derive(Clone, Debug)]
pub enum Clock {
    Simulated { now_ms: f64, table: CostTable },
    Real { start: Instant, offset_ms: f64 },
}

impl Clock {
    pub fn simulated(table: CostTable) -> Self {
        Clock::Simulated { now_ms: 0.0, table }
    }

    pub fn real() -> Self {
        Clock::Real {
            start: Instant::now(),
            offset_ms: 0.0,
        }
    }

    pub fn now_ms(&self) -> f64 {
        match self {
            Clock::Simulated { now_ms, .. } => *now_ms,
            Clock::Real { start, offset_ms } => start.elapsed().as_secs_f64() * 1e3 + offset_ms,
        }
    }

    /// Idles until `t_ms` if the clock is behind it.
    pub fn wait_until(&mut self, t_ms: f64) {
        let now = self.now_ms();
        if now >= t_ms {
            return;
        }
        match self {
            Clock::Simulated { now_ms, .. } => *now_ms = t_ms,
            Clock::Real { offset_ms, .. } => *offset_ms += t_ms - now,
        }
    }

    /// Advances simulated time by `units * rate(kind)`; real clocks ignore it.
    pub fn charge(&mut self, kind: OpKind, units: f64) -> Result<()> {
        if let Clock::Simulated { now_ms, table } = self {
            let Some(&rate) = table.ms_per_unit.get(&kind) else {
                bail!(InvalidConfig, "no cost entry for {kind:?}");
            };
            *now_ms += units * rate;
        }
        Ok(())
    }

    /// Charges every class in `work`, converting MACs to millions.
    pub fn charge_work(&mut self, work: &Work) -> Result<()> {
        for kind in OpKind::ALL {
            let macs = work.get(kind);
            if macs > 0 {
                self.charge(kind, macs as f64 / 1e6)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charge_rate_times_units() {
        let mut c = Clock::simulated(CostTable::uniform(1.0));
        c.charge(OpKind::Encode, 5.0).unwrap();
        assert_eq!(c.now_ms(), 5.0);
        c.wait_until(3.0);
        assert_eq!(c.now_ms(), 5.0);
        c.wait_until(9.0);
        assert_eq!(c.now_ms(), 9.0);
    }

    #[test]
    fn missing_entry_is_config_error() {
        let mut table = CostTable::zero();
        table.ms_per_unit.remove(&OpKind::Generate);
        let mut c = Clock::simulated(table);
        assert!(matches!(c.charge(OpKind::Generate, 1.0), Err(crate::Error::InvalidConfig(_))));
        let mut real = Clock::real();
        real.charge(OpKind::Generate, 1.0).unwrap();
    }

    #[test]
    fn real_clock_jumps_when_idle() {
        let mut c = Clock::real();
        c.wait_until(5_000.0);
        let t = c.now_ms();
        assert!((5_000.0..5_100.0).contains(&t));
        assert!(c.now_ms() >= t);
    }
}
