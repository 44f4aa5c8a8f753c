//! Encodes a stream block by block and compares it with one full pass over
//! the whole waveform.

use simulst::decoder::WordRule;
use simulst::encoder::FeatureStream;
use simulst::harness::noise_segments;
use simulst::tensor::Macs;
use simulst::{Matrix, Model, ModelConfig};

fn main() -> simulst::Result<()> {
    let model = Model::<f64>::random(ModelConfig::default(), WordRule::Separator, 1)?;
    let cfg = &model.config;
    let segments = noise_segments::<f64>(cfg.segment_samples(), 6, 3)?;

    let mut features = FeatureStream::new();
    let mut cache = model.encoder.new_cache();
    let mut states = Matrix::zeros(0, model.encoder.width());
    let mut speech = Matrix::zeros(0, cfg.d_model);
    let mut all = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        let mut macs = Macs::default();
        let frames = features.push(&model.features, seg, cfg.block_size, &mut macs)?;
        states.append_rows(&model.encoder.encode_segment(&mut cache, &frames, &mut macs)?)?;
        speech.append_rows(&model.adapter.adapt(&states, speech.rows(), &mut macs)?)?;
        all.extend_from_slice(seg.samples());
        println!("segment {i}: {} encoder rows, {} speech rows, {} MACs", states.rows(), speech.rows(), macs.0);
    }

    let mut macs = Macs::default();
    let frames = model.features.extract(&all, &mut macs)?;
    let full = model.encoder.encode_full(&frames, &mut macs)?;
    let adapted = model.adapter.adapt_full(&full, &mut macs)?;
    println!(
        "full pass: {} MACs, encoder deviation {:e}, adapter deviation {:e}",
        macs.0,
        full.max_abs_diff(&states),
        adapted.max_abs_diff(&speech)
    );
    Ok(())
}
