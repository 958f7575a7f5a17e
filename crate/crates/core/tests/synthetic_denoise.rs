//! The denoiser against generator ground truth.

use wirewatch_core::metrics::{confusion, miou, precision, ConfusionCounts};
use wirewatch_core::synth::{generate, SynthConfig};
use wirewatch_core::{BinaryMask, PipelineConfig, SlidingWindowDenoiser};

fn totals(pred: &[BinaryMask], gt: &[BinaryMask]) -> ConfusionCounts {
    pred.iter().zip(gt).map(|(p, g)| confusion(p, g).unwrap()).sum()
}

#[test]
fn voting_improves_precision_and_miou() {
    for seed in [11, 12, 13] {
        let cfg = SynthConfig {
            seed,
            ..SynthConfig::default()
        };
        let seq = generate(&cfg).unwrap();
        let pipeline = PipelineConfig::default();
        let mut d = SlidingWindowDenoiser::new(pipeline).unwrap();
        let out: Vec<BinaryMask> = seq.masks.iter().map(|m| d.process_frame(m).unwrap().output).collect();

        let pre = totals(&seq.masks, &seq.ground_truth);
        let post = totals(&out, &seq.ground_truth);
        let pre_miou: f64 = miou(&[pre, pre.complement()]);
        let post_miou: f64 = miou(&[post, post.complement()]);
        assert!(post_miou > pre_miou, "seed {seed}: {post_miou} vs {pre_miou}");
        assert!(precision::<f64>(&post).value > precision::<f64>(&pre).value, "seed {seed}");

        let noise = seq.noise_union().unwrap();
        let warm = pipeline.window - 1;
        let clean = out[warm..]
            .iter()
            .filter(|m| m.data().iter().zip(noise.data()).all(|(a, b)| !(*a && *b)))
            .count();
        assert!(clean * 100 >= 95 * (out.len() - warm), "seed {seed}: {clean} clean frames");
    }
}

#[test]
fn persistent_noise_is_not_removed_by_fraction_voting() {
    // with p = 1 a noise region is as stable as the cable; only argmax drops it
    let cfg = SynthConfig {
        frames: 20,
        noise: wirewatch_core::synth::NoiseSpec {
            flicker: 1.0,
            ..Default::default()
        },
        ..SynthConfig::default()
    };
    let seq = generate(&cfg).unwrap();
    let pipeline = PipelineConfig {
        keep_mode: wirewatch_core::KeepMode::Fraction(0.5),
        ..PipelineConfig::default()
    };
    let mut d = SlidingWindowDenoiser::new(pipeline).unwrap();
    let last = seq.masks.iter().map(|m| d.process_frame(m).unwrap().output).last().unwrap();
    assert_eq!(&last, seq.masks.last().unwrap());
}
