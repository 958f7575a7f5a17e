//! Whole-pipeline invariants over random short sequences.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use wirewatch_core::io::{pgm, stream};
use wirewatch_core::mask::label_regions;
use wirewatch_core::tracker::FrameResult;
use wirewatch_core::{
    BinaryMask, Connectivity, KeepMode, Morphology, PipelineConfig, SlidingWindowDenoiser, StructuringElement, TrackId,
};

fn rects_mask(w: usize, h: usize, rects: &[(usize, usize, usize, usize)]) -> BinaryMask {
    BinaryMask::from_fn(w, h, |x, y| {
        rects
            .iter()
            .any(|&(x0, y0, rw, rh)| x >= x0 && x < x0 + rw && y >= y0 && y < y0 + rh)
    })
}

fn sequence() -> impl Strategy<Value = Vec<BinaryMask>> {
    let rect = (0usize..20, 0usize..20, 1usize..8, 1usize..8);
    prop::collection::vec(prop::collection::vec(rect, 0..4), 1..14)
        .prop_map(|frames| frames.iter().map(|r| rects_mask(24, 24, r)).collect())
}

fn config() -> impl Strategy<Value = PipelineConfig> {
    (
        1usize..6,
        1usize..4,
        1usize..4,
        0usize..6,
        prop::bool::ANY,
        prop_oneof![Just(Morphology::Erode), Just(Morphology::Dilate), Just(Morphology::None)],
        prop_oneof![Just(KeepMode::SingleArgmax), (0.1f64..=1.0).prop_map(KeepMode::Fraction)],
        1.0f64..30.0,
    )
        .prop_map(|(window, r, c, min_area, four, morphology, keep_mode, dist)| PipelineConfig {
            kernel: StructuringElement::new(r, c).unwrap(),
            min_area,
            connectivity: if four { Connectivity::Four } else { Connectivity::Eight },
            window,
            dist_threshold: dist,
            keep_mode,
            morphology,
        })
}

fn run(cfg: PipelineConfig, frames: &[BinaryMask]) -> Vec<FrameResult> {
    let mut d = SlidingWindowDenoiser::new(cfg).unwrap();
    frames.iter().map(|m| d.process_frame(m).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn output_never_invents_pixels(cfg in config(), frames in sequence()) {
        for r in run(cfg, &frames) {
            prop_assert!(r.output.is_subset_of(&r.morphed));
        }
    }

    #[test]
    fn window_counts_match_recount(cfg in config(), frames in sequence()) {
        let mut d = SlidingWindowDenoiser::new(cfg).unwrap();
        for m in &frames {
            let r = d.process_frame(m).unwrap();
            let w = d.window();
            prop_assert!(w.len() <= cfg.window);
            let mut recount: BTreeMap<TrackId, usize> = BTreeMap::new();
            for ids in w.frames() {
                for id in ids {
                    *recount.entry(*id).or_default() += 1;
                }
            }
            prop_assert_eq!(w.counts(), &recount);
            prop_assert_eq!(&r.vote_counts, &recount);
            prop_assert!(r.kept_ids.iter().all(|id| recount.contains_key(id)));
        }
    }

    #[test]
    fn output_is_union_of_kept_regions(cfg in config(), frames in sequence()) {
        for r in run(cfg, &frames) {
            // rebuild the kept union from the morphed mask's own labeling
            let (labels, _) = label_regions(&r.morphed, cfg.connectivity);
            let kept: BTreeSet<u32> = r
                .assigned
                .iter()
                .filter(|(_, id)| r.kept_ids.contains(id))
                .map(|(s, _)| s.label)
                .collect();
            let expect = BinaryMask::from_fn(r.morphed.width(), r.morphed.height(), |x, y| {
                kept.contains(&labels.get(x, y))
            });
            prop_assert_eq!(&r.output, &expect);
        }
    }

    #[test]
    fn deterministic(cfg in config(), frames in sequence()) {
        let a: Vec<_> = run(cfg, &frames).into_iter().map(|r| (r.output, r.kept_ids)).collect();
        let b: Vec<_> = run(cfg, &frames).into_iter().map(|r| (r.output, r.kept_ids)).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn stream_and_pgm_inputs_agree(cfg in config(), frames in sequence()) {
        let mut bytes = Vec::new();
        for m in &frames {
            stream::write_frame(&mut bytes, m).unwrap();
        }
        let streamed: Vec<BinaryMask> = stream::FrameReader::new(&bytes[..]).map(Result::unwrap).collect();
        let from_pgm: Vec<BinaryMask> =
            frames.iter().map(|m| pgm::decode_mask(&pgm::encode_mask(m)).unwrap()).collect();
        let a: Vec<_> = run(cfg, &streamed).into_iter().map(|r| r.output).collect();
        let b: Vec<_> = run(cfg, &from_pgm).into_iter().map(|r| r.output).collect();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn persistent_region_survives_warm_up() {
    let m = rects_mask(40, 40, &[(5, 5, 12, 12)]);
    let cfg = PipelineConfig {
        window: 45,
        ..PipelineConfig::default()
    };
    for r in run(cfg, &vec![m.clone(); 10]) {
        assert_eq!(r.output, m);
    }
}
