//! Hold-n decoding: each step re-decodes, commits all but the last n
//! tokens and keeps only the committed prefix in the decoder cache.

use simulst::decoder::WordRule;
use simulst::harness::noise_segments;
use simulst::streaming::{run_hold_n, Clock, CostTable, Event, IncrementalEngine, PolicyConfig};
use simulst::{Model, ModelConfig};

fn main() -> simulst::Result<()> {
    let model = Model::<f32>::random(ModelConfig::default(), WordRule::EveryToken, 4)?;
    let stream = noise_segments::<f32>(model.config.segment_samples(), 5, 8)?;
    let policy = PolicyConfig {
        max_tokens_per_write: 6,
        ..PolicyConfig::hold_n(2)
    };
    let mut engine = IncrementalEngine::new(&model)?;
    let out = run_hold_n(&mut engine, &stream, &policy, &mut Clock::simulated(CostTable::zero()))?;
    for (step, hyp) in out.hypotheses.iter().enumerate() {
        println!("step {step}: hypothesis {hyp:?}");
    }
    for e in &out.log.events {
        if let Event::Write { audio_ms, tokens, .. } = e {
            println!("write at {audio_ms} ms: {tokens:?}");
        }
    }
    Ok(())
}
