mod common;

use proptest::prelude::*;
use simulst::decoder::{build_consistency_mask, InterleavedLayout, Modality, Vocabulary, WordRule};
use simulst::encoder::{build_blockwise_mask, CausalConv1d};
use simulst::harness::{bleu_lite, laal, DelayMode, DelayProfile};
use simulst::losses::{build_stage2_mask, sample_k, waco_loss, Stage2MaskSpec};
use simulst::streaming::{hold_n_emission, Event, SessionEventLog};
use simulst::tensor::{Macs, RotaryTable};
use simulst::{Matrix, Model, ModelConfig};

fn layout_strategy() -> impl Strategy<Value = InterleavedLayout> {
    prop::collection::vec((any::<bool>(), 1usize..5), 1..7).prop_map(|spans| {
        let mut l = InterleavedLayout::default();
        for (speech, n) in spans {
            l.push(if speech { Modality::Speech } else { Modality::Text }, n);
        }
        l
    })
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix<f64>> {
    prop::collection::vec(-2.0f64..2.0, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

proptest! {
    #[test]
    fn blockwise_mask_law(len in 1usize..40, block in 1usize..9) {
        let m = build_blockwise_mask(len, block);
        for q in 0..len {
            for k in 0..len {
                prop_assert_eq!(m.allowed(q, k), q / block >= k / block);
            }
        }
    }

    #[test]
    fn consistency_mask_law(layout in layout_strategy()) {
        let flags = layout.modalities();
        prop_assert_eq!(build_consistency_mask(&layout), common::consistency_oracle(&flags));
    }

    #[test]
    fn causal_conv_is_causal(
        kernel in prop::collection::vec(-1.0f64..1.0, 1..5),
        stride in 1usize..4,
        input in prop::collection::vec(-1.0f64..1.0, 1..30),
        at in 0usize..30,
    ) {
        let conv = CausalConv1d::<f64>::from_kernel(&kernel, stride).unwrap();
        let x = Matrix::from_fn(input.len(), 1, |r, _| input[r]);
        let y = conv.forward(&x, &mut Macs::default()).unwrap();
        prop_assert_eq!(y.rows(), input.len() / stride);
        let at = at % input.len();
        let mut x2 = x.clone();
        x2.set(at, 0, x.get(at, 0) + 1.0);
        let y2 = conv.forward(&x2, &mut Macs::default()).unwrap();
        for j in 0..y.rows() {
            if conv.receptive_end(j) < at {
                prop_assert_eq!(y.get(j, 0).to_bits(), y2.get(j, 0).to_bits());
            }
        }
    }

    #[test]
    fn hold_n_emission_shape(
        hyp in prop::collection::vec(3u32..20, 0..12),
        committed in 0usize..12,
        n in 1usize..4,
    ) {
        let committed = committed.min(hyp.len());
        let e = hold_n_emission(committed, &hyp, n);
        prop_assert_eq!(e.len(), hyp.len().saturating_sub(n).saturating_sub(committed));
        prop_assert_eq!(e, &hyp[committed..committed + e.len()]);
    }

    #[test]
    fn laal_ca_dominates(
        steps in prop::collection::vec((0.0f64..1000.0, 0.0f64..800.0, 1usize..4), 1..10),
        ref_len in 1usize..30,
    ) {
        let (mut nca, mut ca) = (Vec::new(), Vec::new());
        let mut wall = 0.0f64;
        for (i, &(_, extra, words)) in steps.iter().enumerate() {
            let audio = (i + 1) as f64 * 1000.0;
            wall = wall.max(audio) + extra;
            for _ in 0..words {
                nca.push(audio);
                ca.push(wall);
            }
        }
        let t = steps.len() as f64 * 1000.0;
        let p = DelayProfile { d_nca: nca.clone(), d_ca: ca, source_ms: t, ref_len };
        let x = laal(&p, DelayMode::ComputationAware).unwrap();
        let y = laal(&p, DelayMode::NonComputationAware).unwrap();
        prop_assert!(x >= y);
        if nca.len() <= ref_len {
            // plain average lagging with the reference length
            let r = t / ref_len as f64;
            let tau = nca.iter().position(|&d| d >= t).map_or(nca.len(), |i| i + 1);
            let al = (0..tau).map(|i| nca[i] - i as f64 * r).sum::<f64>() / tau as f64;
            prop_assert!((y - al).abs() < 1e-9);
        }
    }

    #[test]
    fn bleu_bounds_and_bag_semantics(
        hyp in prop::collection::vec(0u32..6, 0..15),
        reference in prop::collection::vec(0u32..6, 1..15),
        seed in any::<u64>(),
    ) {
        let b = bleu_lite(&hyp, &reference, 4).unwrap();
        prop_assert!((0.0..=1.0).contains(&b));
        let mut shuffled = hyp.clone();
        let mut rng = common::rng(seed);
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        let a = bleu_lite(&hyp, &reference, 1).unwrap();
        let c = bleu_lite(&shuffled, &reference, 1).unwrap();
        prop_assert!((a - c).abs() < 1e-12);
    }

    #[test]
    fn waco_nonnegative_and_scale_invariant(
        s in matrix(3, 4),
        t in matrix(3, 4),
        row in 0usize..3,
        factor in 0.1f64..10.0,
    ) {
        prop_assume!(s.iter_rows().chain(t.iter_rows()).all(|r| r.iter().map(|v| v * v).sum::<f64>() > 1e-6));
        let base = waco_loss(&s, &t, 0.2).unwrap();
        prop_assert!(base >= 0.0);
        let mut scaled = s.clone();
        for v in scaled.row_mut(row) {
            *v *= factor;
        }
        prop_assert!((waco_loss(&scaled, &t, 0.2).unwrap() - base).abs() < 1e-6);
    }

    #[test]
    fn stage2_rows_are_monotone(
        counts in prop::collection::vec(0usize..4, 1..6),
        text_len in 1usize..12,
        k in 1usize..5,
        n in 1usize..4,
    ) {
        let spec = Stage2MaskSpec::new(counts, text_len, k, n).unwrap();
        let mask = build_stage2_mask(&spec);
        let s = spec.speech_len();
        for q in 0..s {
            for t in s..s + text_len {
                prop_assert!(!mask.allowed(q, t));
            }
        }
        for p in s + 1..s + text_len {
            for j in 0..s {
                prop_assert!(!mask.allowed(p - 1, j) || mask.allowed(p, j));
            }
        }
    }

    #[test]
    fn event_log_round_trip(events in prop::collection::vec((any::<bool>(), 0.0f64..1e6, prop::collection::vec(0u32..40, 0..5)), 0..8)) {
        let mut log = SessionEventLog::new();
        for (i, (read, t, tokens)) in events.into_iter().enumerate() {
            log.push(if read {
                Event::Read { t_wall_ms: t, audio_ms: t, segment_index: i, padded: i % 3 == 0 }
            } else {
                Event::Write { t_wall_ms: t, audio_ms: t, words: tokens.len(), tokens }
            });
        }
        prop_assert_eq!(SessionEventLog::from_jsonl(&log.to_jsonl().unwrap()).unwrap(), log);
    }

    #[test]
    fn every_token_words(tokens in prop::collection::vec(0u32..16, 0..20)) {
        let v = Vocabulary::new(16, WordRule::EveryToken).unwrap();
        let ordinary = tokens.iter().filter(|&&t| t != v.bos && t != v.eos).count();
        prop_assert_eq!(v.count_words(&tokens, true), ordinary);
    }

    #[test]
    fn rotary_preserves_norm(x in matrix(1, 8), pos in 0usize..512) {
        let rope = RotaryTable::<f64>::new(512, 8, 10_000.0).unwrap();
        let y = rope.apply(&x, pos).unwrap();
        prop_assert!((y.frobenius_norm() - x.frobenius_norm()).abs() < 1e-9);
    }

    #[test]
    fn sampled_k_in_set(set in prop::collection::vec(1usize..200, 1..6), seed in any::<u64>()) {
        prop_assert!(set.contains(&sample_k(&set, seed).unwrap()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adapter_length_law(segments in 1usize..10) {
        let model = Model::<f32>::random(ModelConfig::default(), WordRule::Separator, 0).unwrap();
        let l = segments * model.config.block_size;
        prop_assert_eq!(model.adapter.output_len(l), l / 2 / 2);
    }

    #[test]
    fn weights_round_trip(seed in any::<u64>()) {
        let model = Model::<f32>::random(ModelConfig::default(), WordRule::Separator, seed).unwrap();
        let store = model.to_store();
        let bytes = store.to_bytes();
        let back = simulst::tensor::weights::WeightStore::from_bytes(&bytes.0, &bytes.1).unwrap();
        prop_assert_eq!(back, store);
    }
}
