//! Quality and latency of one simulated session, with and without compute
//! time.

use simulst::decoder::WordRule;
use simulst::harness::{delays_from_log, laal, noise_segments, DelayMode, MetricsReport};
use simulst::streaming::{run_policy, Clock, CostTable, IncrementalEngine, PolicyConfig};
use simulst::{Model, ModelConfig};

fn main() -> simulst::Result<()> {
    let model = Model::<f32>::random(ModelConfig::default(), WordRule::EveryToken, 6)?;
    let stream = noise_segments::<f32>(model.config.segment_samples(), 5, 1)?;
    let reference = [4, 7, 7, 9, 12, 5, 6, 8];
    let words = model.vocab.count_words(&reference, true);

    for rate in [0.0, 5.0, 50.0] {
        let mut engine = IncrementalEngine::new(&model)?;
        let mut clock = Clock::simulated(CostTable::uniform(rate));
        let out = run_policy(&mut engine, &stream, &PolicyConfig::wait_k(1, 2), &mut clock)?;
        let profile = delays_from_log(&out.log, words)?;
        let report = MetricsReport::compute(&out.log, &out.tokens, &reference, words)?;
        println!(
            "{rate:>5} ms/MMAC: LAAL {:.1} ms, computation-aware {:.1} ms, BLEU {:.3}",
            laal(&profile, DelayMode::NonComputationAware)?,
            report.laal_ca_ms,
            report.bleu_lite
        );
    }
    Ok(())
}
