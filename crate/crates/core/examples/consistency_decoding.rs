//! Interleaves speech and text rows in the decoder cache and checks the
//! cached logits against a masked full pass.

use simulst::decoder::{build_consistency_mask, InterleavedLayout, Modality};
use simulst::tensor::{Initializer, Macs};
use simulst::{Matrix, Model, ModelConfig};

fn main() -> simulst::Result<()> {
    let cfg = ModelConfig::default();
    let model = Model::<f64>::random(cfg.clone(), simulst::decoder::WordRule::Separator, 5)?;
    let dec = &model.decoder;
    let layout = InterleavedLayout::new(vec![
        (Modality::Speech, 3),
        (Modality::Text, 2),
        (Modality::Speech, 2),
        (Modality::Text, 3),
    ])?;
    let mask = build_consistency_mask(&layout);
    print!("{}", mask.to_grid());

    let emb: Matrix<f64> = Initializer::new(9).uniform(layout.len(), cfg.d_model, 1.0);
    let mut macs = Macs::default();
    let full = dec.forward_full(&emb, &layout, &mask, &mut macs)?;

    let mut cache = dec.new_cache();
    let mut rows = Matrix::zeros(0, dec.width());
    let mut start = 0;
    for &(modality, len) in layout.spans() {
        let out = dec.append(&mut cache, &emb.slice_rows(start, start + len), modality, &mut macs)?;
        rows.append_rows(&out.hidden)?;
        start += len;
    }
    let cached = dec.logits(&rows, &mut macs)?;
    println!(
        "speech positions {}, text positions {}, max logit deviation {:e}",
        cache.speech_counter(),
        cache.text_counter(),
        full.max_abs_diff(&cached)
    );
    Ok(())
}
