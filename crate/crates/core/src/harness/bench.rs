use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::decoder::GenerateLimits;
use crate::encoder::WaveformSegment;
use crate::error::{bail, Result};
use crate::model::Model;
use crate::streaming::{Clock, IncrementalEngine, SimulEngine, Variant};
use crate::tensor::Real;

/// Shape of a scaling run: a wait-k-stride-n schedule that never stops early.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub segments: usize,
    pub k: usize,
    pub n: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            segments: 32,
            k: 2,
            n: 3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub variant: Variant,
    /// 1-based read step.
    pub step: usize,
    pub wall_ms: f64,
    pub macs: u64,
}

/// Seeded uniform noise cut into segments.
pub fn noise_segments<T: Real>(segment_samples: usize, count: usize, seed: u64) -> Result<Vec<WaveformSegment<T>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<T> = (0..segment_samples * count)
        .map(|_| T::from_f64_lossy(rng.gen_range(-1.0..1.0)))
        .collect();
    WaveformSegment::split(&samples, segment_samples)
}

/// Runs the schedule once per variant and records the time and counted
/// work of every step. Step time comes from `clock`: simulated charges or
/// measured wall time.
pub fn bench_scaling<T: Real>(
    model: &Model<T>,
    cfg: &BenchConfig,
    variants: &[Variant],
    clock: &Clock,
) -> Result<Vec<BenchRecord>> {
    if cfg.segments < 4 {
        bail!(InvalidConfig, "bench needs at least 4 segments");
    }
    if cfg.k == 0 || cfg.n == 0 {
        bail!(InvalidConfig, "k and n must be >= 1");
    }
    let segments = noise_segments::<T>(model.config.segment_samples(), cfg.segments, cfg.seed)?;
    let limits = GenerateLimits {
        n_words: Some(cfg.n),
        max_tokens: GenerateLimits::DEFAULT_MAX_TOKENS,
        suppress_eos: true,
    };
    let mut records = Vec::new();
    for &variant in variants {
        let mut clock = match clock {
            Clock::Simulated { table, .. } => Clock::simulated(table.clone()),
            Clock::Real { .. } => Clock::real(),
        };
        let mut engine = IncrementalEngine::with_variant(model, variant)?;
        for (i, segment) in segments.iter().enumerate() {
            let start = clock.now_ms();
            let mut work = engine.read(segment)?;
            if i + 1 >= cfg.k {
                let (_, w) = engine.generate(&limits)?;
                work.merge(&w);
            }
            clock.charge_work(&work)?;
            records.push(BenchRecord {
                variant,
                step: i + 1,
                wall_ms: clock.now_ms() - start,
                macs: work.total(),
            });
        }
    }
    Ok(records)
}

pub const BENCH_CSV_HEADER: &str = "variant,step,wall_ms,macs";

pub fn write_bench_csv(records: &[BenchRecord], mut out: impl Write) -> Result<()> {
    writeln!(out, "{BENCH_CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{},{},{:.6},{}", r.variant.name(), r.step, r.wall_ms, r.macs)?;
    }
    Ok(())
}

/// `(step, macs)` pairs of one variant from step `from` on.
pub fn series(records: &[BenchRecord], variant: Variant, from: usize) -> (Vec<f64>, Vec<f64>) {
    records
        .iter()
        .filter(|r| r.variant == variant && r.step >= from)
        .map(|r| (r.step as f64, r.macs as f64))
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ModelConfig;
    use crate::decoder::WordRule;
    use crate::streaming::CostTable;

    #[test]
    fn csv_and_steps() {
        let model = Model::<f32>::random(ModelConfig::default(), WordRule::EveryToken, 1).unwrap();
        let cfg = BenchConfig {
            segments: 4,
            ..BenchConfig::default()
        };
        let recs = bench_scaling(&model, &cfg, &Variant::ALL, &Clock::simulated(CostTable::uniform(1.0))).unwrap();
        assert_eq!(recs.len(), 12);
        for chunk in recs.chunks(4) {
            assert_eq!(chunk.iter().map(|r| r.step).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
            for r in chunk {
                assert!((r.wall_ms - r.macs as f64 / 1e6).abs() < 1e-9);
            }
        }
        let mut buf = Vec::new();
        write_bench_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some(BENCH_CSV_HEADER));
        assert!(text.lines().nth(1).unwrap().starts_with("full_recompute,1,"));
        let short = BenchConfig {
            segments: 3,
            ..cfg
        };
        assert!(bench_scaling(&model, &short, &Variant::ALL, &Clock::real()).is_err());
    }
}
