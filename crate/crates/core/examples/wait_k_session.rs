//! Runs a wait-k, stride-n session on a noise stream and prints the log.

use simulst::decoder::WordRule;
use simulst::harness::noise_segments;
use simulst::streaming::{run_wait_k_stride_n, Clock, CostTable, IncrementalEngine, PolicyConfig};
use simulst::{Model, ModelConfig};

fn main() -> simulst::Result<()> {
    let model = Model::<f32>::random(ModelConfig::default(), WordRule::EveryToken, 2)?;
    let stream = noise_segments::<f32>(model.config.segment_samples(), 6, 11)?;
    let policy = PolicyConfig {
        max_tokens_per_write: 12,
        ..PolicyConfig::wait_k(2, 2)
    };
    let mut engine = IncrementalEngine::new(&model)?;
    let mut clock = Clock::simulated(CostTable::uniform(20.0));
    let out = run_wait_k_stride_n(&mut engine, &stream, &policy, &mut clock)?;
    print!("{}", out.log.to_jsonl()?);
    println!("translation: {}", model.vocab.render(&out.tokens));
    Ok(())
}
