//! The runtime forward pass against a plain f64 transcription of the
//! architecture table, on random weights and inputs.

use raes::features::FeatureTensor;
use raes::nn::{fixtures, Model, WeightBundle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

struct T {
    c: usize,
    h: usize,
    w: usize,
    v: Vec<f64>,
}

fn p(b: &WeightBundle, name: &str) -> (Vec<usize>, Vec<f64>) {
    let t = b.get(name).unwrap_or_else(|| panic!("{name}"));
    (
        t.shape().to_vec(),
        t.data().iter().map(|&x| x as f64).collect(),
    )
}

fn conv(x: &T, b: &WeightBundle, name: &str, stride: usize, pad: usize, groups_eq_c: bool) -> T {
    let (ws, w) = p(b, &format!("{name}.weight"));
    let (_, bias) = p(b, &format!("{name}.bias"));
    let (co, k) = (ws[0], ws[2]);
    let ho = (x.h + 2 * pad - k) / stride + 1;
    let wo = (x.w + 2 * pad - k) / stride + 1;
    let mut v = vec![0.0; co * ho * wo];
    for o in 0..co {
        let ins: Vec<usize> = if groups_eq_c {
            vec![o]
        } else {
            (0..x.c).collect()
        };
        for y in 0..ho {
            for xx in 0..wo {
                let mut acc = bias[o];
                for (j, &i) in ins.iter().enumerate() {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (y * stride + ky) as isize - pad as isize;
                            let ix = (xx * stride + kx) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= x.h as isize || ix >= x.w as isize {
                                continue;
                            }
                            let kj = if groups_eq_c { 0 } else { j };
                            let wi = ((o * ws[1] + kj) * k + ky) * k + kx;
                            acc += w[wi] * x.v[(i * x.h + iy as usize) * x.w + ix as usize];
                        }
                    }
                }
                v[(o * ho + y) * wo + xx] = acc;
            }
        }
    }
    T {
        c: co,
        h: ho,
        w: wo,
        v,
    }
}

fn dense(x: &[f64], b: &WeightBundle, name: &str) -> Vec<f64> {
    let (ws, w) = p(b, &format!("{name}.weight"));
    let (_, bias) = p(b, &format!("{name}.bias"));
    (0..ws[0])
        .map(|o| bias[o] + (0..ws[1]).map(|i| w[o * ws[1] + i] * x[i]).sum::<f64>())
        .collect()
}

fn relu6(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.clamp(0.0, 6.0));
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn reference(b: &WeightBundle, input: &[f32]) -> (Vec<f64>, [f64; 3]) {
    let scale = b.get("input_norm.scale").unwrap().data()[0] as f64;
    let offset = b.get("input_norm.offset").unwrap().data()[0] as f64;
    let x = T {
        c: 2,
        h: 40,
        w: 32,
        v: input.iter().map(|&v| v as f64 * scale + offset).collect(),
    };
    let mut x = conv(&x, b, "stem", 2, 1, false);
    relu6(&mut x.v);
    for (i, stride) in [2, 2, 1, 1].into_iter().enumerate() {
        let name = format!("irb{}", i + 1);
        let mut e = conv(&x, b, &format!("{name}.expand"), 1, 0, false);
        relu6(&mut e.v);
        let mut d = conv(&e, b, &format!("{name}.depthwise"), stride, 1, true);
        relu6(&mut d.v);
        let mut y = conv(&d, b, &format!("{name}.project"), 1, 0, false);
        if stride == 1 && y.c == x.c {
            for (a, r) in y.v.iter_mut().zip(&x.v) {
                *a += r;
            }
        }
        x = y;
    }
    let plane = x.h * x.w;
    let pooled: Vec<f64> =
        x.v.chunks(plane)
            .map(|c| c.iter().sum::<f64>() / plane as f64)
            .collect();
    let mut emb = dense(&pooled, b, "dtd.fc1");
    relu6(&mut emb);
    let logits = dense(&emb, b, "dtd.fc2");
    let m = logits.iter().cloned().fold(f64::MIN, f64::max);
    let ex: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = ex.iter().sum();
    let dtd = [ex[0] / z, ex[1] / z, ex[2] / z];
    let gate: Vec<f64> = dense(&emb, b, "gate").into_iter().map(sigmoid).collect();
    let gated: Vec<f64> =
        x.v.iter()
            .enumerate()
            .map(|(i, v)| v * gate[i / plane])
            .collect();
    let mut hidden = dense(&gated, b, "mask.fc1");
    relu6(&mut hidden);
    let mask = dense(&hidden, b, "mask.fc2")
        .into_iter()
        .map(|v| sigmoid(v).clamp(0.0, 1.0))
        .collect();
    (mask, dtd)
}

#[test]
fn runtime_matches_f64_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut interior = 0;
    for draw in 0..20u64 {
        let gain = [0.5f32, 1.0, 2.0][draw as usize % 3];
        let bundle = Arc::new(fixtures::random_bundle(1000 + draw, gain));
        let model = Model::new(bundle.clone()).unwrap();
        // Log-magnitude-like range.
        let data: Vec<f32> = (0..2560).map(|_| rng.gen_range(-16.0..3.0)).collect();
        let out = model
            .forward(&FeatureTensor {
                data: data.clone(),
                frame_index: 0,
            })
            .unwrap();
        let (mask, dtd) = reference(&bundle, &data);
        let worst = out
            .mask
            .iter()
            .zip(&mask)
            .map(|(a, b)| (*a as f64 - b).abs())
            .chain(out.dtd.iter().zip(&dtd).map(|(a, b)| (*a as f64 - b).abs()))
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "draw {draw}: max abs diff {worst}");
        interior += mask.iter().filter(|&&g| g > 0.01 && g < 0.99).count();
    }
    // Saturated outputs would make the comparison vacuous.
    assert!(
        interior > 20 * 64 / 4,
        "only {interior} unsaturated mask values"
    );
}
