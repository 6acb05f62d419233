use std::sync::Arc;

use proptest::prelude::*;
use raes::nn::{fixtures, ops, Model, Tensor};
use raes::pipeline::{MaskSource, PipelineConfig, PipelineState};
use raes::stft::StftConfig;
use raes::synth::mix_at_ser;
use raes::synth::sources::speech_like;

fn tensor(shape: Vec<usize>, vals: &[f32]) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::new(shape, vals.iter().cycle().take(n).copied().collect()).unwrap()
}

#[allow(clippy::type_complexity)]
fn conv_case() -> impl Strategy<
    Value = (
        usize,
        usize,
        usize,
        usize,
        usize,
        usize,
        Vec<f32>,
        Vec<f32>,
        Vec<f32>,
        f32,
        f32,
        bool,
    ),
> {
    (
        1usize..6,
        1usize..6,
        3usize..10,
        3usize..10,
        prop::sample::select(vec![1usize, 3]),
        1usize..3,
    )
        .prop_flat_map(|(ci, co, h, w, k, s)| {
            (
                Just(ci),
                Just(co),
                Just(h),
                Just(w),
                Just(k),
                Just(s),
                prop::collection::vec(-1.0f32..1.0, ci * h * w),
                prop::collection::vec(-1.0f32..1.0, ci * h * w),
                prop::collection::vec(-0.3f32..0.3, co * ci * k * k),
                -2.0f32..2.0,
                -2.0f32..2.0,
                any::<bool>(),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_is_linear((ci, co, h, w, k, s, x, y, kern, a, b, depthwise) in conv_case()) {
        let (co, kshape) = if depthwise { (ci, vec![ci, 1, k, k]) } else { (co, vec![co, ci, k, k]) };
        let kt = tensor(kshape, &kern);
        let zero = vec![0.0; co];
        let pad = k / 2;
        let run = |v: &[f32]| {
            let t = Tensor::new(vec![ci, h, w], v.to_vec()).unwrap();
            if depthwise {
                ops::depthwise_conv2d(&t, &kt, &zero, s, pad).unwrap()
            } else {
                ops::conv2d(&t, &kt, &zero, s, pad).unwrap()
            }
        };
        let mixed: Vec<f32> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = run(&mixed);
        let (rx, ry) = (run(&x), run(&y));
        for ((l, p), q) in lhs.data().iter().zip(rx.data()).zip(ry.data()) {
            prop_assert!((l - (a * p + b * q)).abs() < 1e-6, "{} vs {}", l, a * p + b * q);
        }
    }

    #[test]
    fn mixing_meets_target_ser(target in -13.0f64..0.0, seed in 0u64..1000) {
        let n = 24_000;
        let s = speech_like(n, 16_000, seed);
        let y = speech_like(n, 16_000, seed + 5000);
        let m = mix_at_ser(&s, &y, target, &StftConfig::new(16_000)).unwrap();
        let measured = m.measured_ser_db.unwrap();
        prop_assert!((measured - target).abs() <= 0.1, "{measured} vs {target}");
        for ((d, a), b) in m.d.samples().iter().zip(m.s.samples()).zip(m.y.samples()) {
            prop_assert_eq!(*d, a + b);
            prop_assert!(d.abs() <= 1.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    // Perturbing the inputs from sample `m` on leaves every earlier output
    // untouched: the pipeline never looks ahead.
    #[test]
    fn pipeline_is_causal(m in 200usize..3000, seed in 0u64..100) {
        let model = Arc::new(Model::new(Arc::new(fixtures::random_bundle(seed, 1.0))).unwrap());
        let mic = speech_like(4000, 16_000, seed).into_samples();
        let far = speech_like(4000, 16_000, seed + 1).into_samples();
        let mut mic2 = mic.clone();
        let mut far2 = far.clone();
        for i in m..mic.len() {
            mic2[i] = -mic2[i] + 0.1;
            far2[i] *= 0.5;
        }
        let run = |a: &[f32], b: &[f32]| {
            PipelineState::with_model(model.clone()).unwrap().process(a, b).unwrap()
        };
        let (o1, o2) = (run(&mic, &far), run(&mic2, &far2));
        prop_assert_eq!(&o1[..m], &o2[..m]);
        prop_assert!(o1[m..] != o2[m..]);
    }
}

#[test]
fn constant_mask_sources_agree() {
    // The network with a constant-mask bundle and the built-in constant
    // source give the same audio.
    let mic = speech_like(6000, 16_000, 9).into_samples();
    let far = speech_like(6000, 16_000, 10).into_samples();
    let model = Arc::new(Model::new(Arc::new(fixtures::constant_mask_bundle(0.25))).unwrap());
    let a = PipelineState::with_model(model)
        .unwrap()
        .process(&mic, &far)
        .unwrap();
    let b = PipelineState::new(MaskSource::Constant(0.25), PipelineConfig::default())
        .unwrap()
        .process(&mic, &far)
        .unwrap();
    let worst = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f32, f32::max);
    assert!(worst < 1e-6, "{worst}");
}
