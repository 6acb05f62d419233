//! Deterministic weight bundles for tests, benchmarks and smoke runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::nn::arch::Architecture;
use crate::nn::tensor::Tensor;
use crate::nn::weights::WeightBundle;

fn build(mut fill: impl FnMut(&str, &[usize]) -> Tensor) -> WeightBundle {
    let arch = Architecture::default();
    let tensors = arch
        .tensor_specs()
        .into_iter()
        .map(|(name, shape)| {
            let t = fill(&name, &shape);
            (name, t)
        })
        .collect();
    WeightBundle::from_tensors(arch, tensors).expect("fixture matches architecture")
}

fn is_identity_norm(name: &str) -> Option<f32> {
    match name {
        "input_norm.scale" => Some(1.0),
        "input_norm.offset" => Some(0.0),
        _ => None,
    }
}

/// All weights and biases zero (input normalization left at identity).
/// Produces mask 0.5 everywhere and a uniform DTD posterior.
pub fn zero_bundle() -> WeightBundle {
    build(|name, shape| match is_identity_norm(name) {
        Some(v) => Tensor::filled(shape.to_vec(), v),
        None => Tensor::zeros(shape.to_vec()),
    })
}

/// Zero weights with the mask head biased so every bin outputs `value`.
/// `value = 1.0` gives an exact pass-through mask.
pub fn constant_mask_bundle(value: f32) -> WeightBundle {
    let logit = if value >= 1.0 {
        40.0
    } else if value <= 0.0 {
        -40.0
    } else {
        (value / (1.0 - value)).ln()
    };
    build(|name, shape| match (is_identity_norm(name), name) {
        (Some(v), _) => Tensor::filled(shape.to_vec(), v),
        (None, "mask.fc2.bias") => Tensor::filled(shape.to_vec(), logit),
        _ => Tensor::zeros(shape.to_vec()),
    })
}

/// Uniform weights in `±gain / sqrt(fan_in)`, biases in `±0.1 * gain`.
pub fn random_bundle(seed: u64, gain: f32) -> WeightBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    build(|name, shape| {
        if let Some(v) = is_identity_norm(name) {
            return Tensor::filled(shape.to_vec(), v);
        }
        let n: usize = shape.iter().product();
        let bound = if name.ends_with(".bias") {
            0.1 * gain
        } else {
            let fan_in: usize = shape[1..].iter().product();
            gain / (fan_in as f32).sqrt()
        };
        let data = (0..n).map(|_| rng.gen_range(-bound..=bound)).collect();
        Tensor::new(shape.to_vec(), data).unwrap()
    })
}
