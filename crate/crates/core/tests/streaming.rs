mod common;

use common::{noise, pinned, rng};
use simulst::decoder::WordRule;
use simulst::encoder::WaveformSegment;
use simulst::harness::{bench_scaling, series, BenchConfig};
use simulst::streaming::{
    run_policy, Clock, CostTable, Event, IncrementalEngine, PolicyConfig, SessionEventLog, Variant,
};
use simulst::{Error, Model};

fn session(model: &Model<f32>, stream: &[WaveformSegment<f32>], policy: &PolicyConfig, table: CostTable) -> SessionEventLog {
    let mut engine = IncrementalEngine::new(model).unwrap();
    run_policy(&mut engine, stream, policy, &mut Clock::simulated(table)).unwrap().log
}

#[test]
fn zero_cost_writes_at_audio_time() {
    let model = pinned::<f32>(WordRule::EveryToken, 5, 11);
    let stream = noise::<f32>(&mut rng(1), &model.config, 5);
    for policy in [PolicyConfig::wait_k(2, 2), PolicyConfig::hold_n(1)] {
        let log = session(&model, &stream, &policy, CostTable::zero());
        for e in &log.events {
            match e {
                Event::Read { t_wall_ms, audio_ms, .. } | Event::Write { t_wall_ms, audio_ms, .. } => {
                    assert_eq!(t_wall_ms, audio_ms)
                }
            }
        }
    }
}

#[test]
fn compute_lag_scales_with_rate() {
    // rates high enough that compute always outruns the audio, so no waits after the first read
    let model = pinned::<f32>(WordRule::EveryToken, 5, 12);
    let stream = noise::<f32>(&mut rng(2), &model.config, 4);
    let policy = PolicyConfig::wait_k(1, 2);
    let lag = |rate: f64| {
        let log = session(&model, &stream, &policy, CostTable::uniform(rate));
        let first = match log.events[0] {
            Event::Read { t_wall_ms, .. } => t_wall_ms,
            _ => unreachable!(),
        };
        log.events
            .iter()
            .filter_map(|e| match e {
                Event::Write { t_wall_ms, .. } => Some(t_wall_ms - first),
                _ => None,
            })
            .collect::<Vec<_>>()
    };
    let (a, b) = (lag(1e6), lag(2e6));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!(*x > 0.0);
        assert!((y / x - 2.0).abs() < 1e-9, "{x} {y}");
    }
}

#[test]
fn reads_cover_the_stream_once() {
    let model = pinned::<f32>(WordRule::EveryToken, 5, 13);
    let segment = model.config.segment_samples();
    let samples = vec![0.25f32; segment * 3 + segment / 2];
    let stream = WaveformSegment::split(&samples, segment).unwrap();
    assert_eq!(stream.len(), 4);
    for policy in [PolicyConfig::wait_k(1, 1), PolicyConfig::wait_k(3, 2), PolicyConfig::hold_n(2)] {
        let log = session(&model, &stream, &policy, CostTable::uniform(0.1));
        let reads: Vec<_> = log
            .events
            .iter()
            .filter_map(|e| match e {
                Event::Read { segment_index, padded, audio_ms, .. } => Some((*segment_index, *padded, *audio_ms)),
                _ => None,
            })
            .collect();
        assert_eq!(reads.iter().map(|r| r.0).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
        assert_eq!(reads.iter().map(|r| r.1).collect::<Vec<_>>(), vec![false, false, false, true]);
        for (i, r) in reads.iter().enumerate() {
            assert_eq!(r.2, (i + 1) as f64 * policy.segment_ms);
        }
        log.validate().unwrap();
    }
}

#[test]
fn large_k_writes_once() {
    let model = pinned::<f32>(WordRule::EveryToken, 5, 14);
    let stream = noise::<f32>(&mut rng(3), &model.config, 3);
    let log = session(&model, &stream, &PolicyConfig::wait_k(7, 2), CostTable::zero());
    assert_eq!(log.writes().count(), 1);
    assert_eq!(log.reads(), 3);
    assert!(matches!(log.events.last(), Some(Event::Write { .. })));
}

#[test]
fn bad_sessions_are_rejected() {
    let model = pinned::<f32>(WordRule::EveryToken, 5, 15);
    let mut engine = IncrementalEngine::new(&model).unwrap();
    let mut clock = Clock::simulated(CostTable::zero());
    let err = run_policy(&mut engine, &[], &PolicyConfig::wait_k(1, 1), &mut clock).unwrap_err();
    assert!(matches!(err, Error::InvalidInput(_)));
    let stream = noise::<f32>(&mut rng(4), &model.config, 2);
    for bad in [PolicyConfig::wait_k(0, 1), PolicyConfig::wait_k(1, 0), PolicyConfig::hold_n(0)] {
        let err = run_policy(&mut engine, &stream, &bad, &mut clock).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)), "{err:?}");
    }
    let mut partial = CostTable::zero();
    partial.ms_per_unit.clear();
    let err = run_policy(&mut engine, &stream, &PolicyConfig::wait_k(1, 1), &mut Clock::simulated(partial)).unwrap_err();
    assert!(matches!(err, Error::InvalidConfig(_)));
    assert!(Variant::parse("quadratic").is_err());
}

#[test]
fn incremental_step_work_is_affine() {
    let model = pinned::<f32>(WordRule::EveryToken, 5, 16);
    let cfg = BenchConfig { segments: 10, k: 2, n: 2, seed: 5 };
    let recs = bench_scaling(&model, &cfg, &[Variant::FullIncremental], &Clock::simulated(CostTable::zero())).unwrap();
    let (_, macs) = series(&recs, Variant::FullIncremental, cfg.k + 1);
    for w in macs.windows(3) {
        assert_eq!(w[2] - 2.0 * w[1] + w[0], 0.0, "{macs:?}");
    }
}
