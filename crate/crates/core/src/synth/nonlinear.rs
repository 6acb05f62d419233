//! Power amplifier clipping, loudspeaker nonlinearity and system delay.

use serde::{Deserialize, Serialize};

use crate::audio::AudioSignal;

pub fn hard_clip(u: &AudioSignal, u_max: f32) -> AudioSignal {
    assert!(
        u_max > 0.0 && u_max <= 1.0,
        "clip level {u_max} outside (0, 1]"
    );
    let out = u
        .samples()
        .iter()
        .map(|&v| v.clamp(-u_max, u_max))
        .collect();
    AudioSignal::new(out, u.sample_rate()).expect("clipping keeps samples finite")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityMode {
    /// `gamma * (2 / (1 + exp(-a b)) - 1)`: silence maps to silence.
    #[default]
    Corrected,
    /// `gamma * 2 / (1 + exp(-a b))`, the printed form, which leaves a
    /// constant offset of `gamma` at silence.
    AsWritten,
}

/// Memoryless sigmoid loudspeaker model applied to
/// `b = 1.5 u - 0.3 u^2`.
pub fn nonlinearity_sample(
    u: f64,
    gamma: f64,
    a_pos: f64,
    a_neg: f64,
    mode: NonlinearityMode,
) -> f64 {
    let b = 1.5 * u - 0.3 * u * u;
    let a = if b > 0.0 { a_pos } else { a_neg };
    let s = 2.0 / (1.0 + (-a * b).exp());
    match mode {
        NonlinearityMode::Corrected => gamma * (s - 1.0),
        NonlinearityMode::AsWritten => gamma * s,
    }
}

pub fn loudspeaker_nonlinearity(
    u_clip: &AudioSignal,
    gamma: f64,
    a_pos: f64,
    a_neg: f64,
    mode: NonlinearityMode,
) -> AudioSignal {
    let out = u_clip
        .samples()
        .iter()
        .map(|&v| nonlinearity_sample(v as f64, gamma, a_pos, a_neg, mode) as f32)
        .collect();
    AudioSignal::new(out, u_clip.sample_rate()).expect("sigmoid output is finite")
}

pub fn delay_samples(delay_ms: f64, sample_rate: u32) -> usize {
    assert!(delay_ms >= 0.0, "negative delay");
    (delay_ms * sample_rate as f64 / 1000.0).round() as usize
}

/// Zero-prefixes the signal and truncates the tail, keeping its length.
pub fn apply_delay(u: &AudioSignal, delay_ms: f64) -> AudioSignal {
    let n = delay_samples(delay_ms, u.sample_rate()).min(u.len());
    let mut out = vec![0.0; n];
    out.extend_from_slice(&u.samples()[..u.len() - n]);
    AudioSignal::new(out, u.sample_rate()).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sig(v: Vec<f32>) -> AudioSignal {
        AudioSignal::new(v, 16_000).unwrap()
    }

    #[test]
    fn clip_examples() {
        let c = hard_clip(&sig(vec![1.2, -1.2, 0.3]), 0.9);
        assert_eq!(c.samples(), &[0.9, -0.9, 0.3]);
        let quiet = sig(vec![0.1, -0.5, 0.74]);
        assert_eq!(hard_clip(&quiet, 0.75), quiet);
    }

    #[test]
    fn nonlinearity_at_silence() {
        let z = sig(vec![0.0; 4]);
        let c = loudspeaker_nonlinearity(&z, 0.2, 0.3, 0.2, NonlinearityMode::Corrected);
        assert!(c.samples().iter().all(|&v| v == 0.0));
        let w = loudspeaker_nonlinearity(&z, 0.2, 0.3, 0.2, NonlinearityMode::AsWritten);
        assert!(w.samples().iter().all(|&v| (v - 0.2).abs() < 1e-7));
    }

    #[test]
    fn corrected_mode_is_strictly_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let gamma = rng.gen_range(0.15..=0.3);
            let a_pos = rng.gen_range(0.05..=0.45);
            let a_neg = rng.gen_range(0.1..=0.4);
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=2000 {
                let u = -1.0 + i as f64 * 1e-3;
                let v = nonlinearity_sample(u, gamma, a_pos, a_neg, NonlinearityMode::Corrected);
                assert!(v > prev, "not increasing at u={u}");
                prev = v;
            }
        }
    }

    #[test]
    fn delay_examples() {
        assert_eq!(delay_samples(8.0, 16_000), 128);
        assert_eq!(delay_samples(40.0, 16_000), 640);
        let x = sig((0..300).map(|i| (i as f32 * 0.37).sin()).collect());
        assert_eq!(apply_delay(&x, 0.0), x);
        let d = apply_delay(&x, 8.0);
        assert_eq!(d.len(), x.len());
        assert!(d.samples()[..128].iter().all(|&v| v == 0.0));
        assert_eq!(&d.samples()[128..], &x.samples()[..172]);
    }

    #[test]
    fn cross_correlation_peaks_at_delay() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = sig((0..4000).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let delay_ms = 23.0;
        let d = apply_delay(&x, delay_ms);
        let xs = x.samples();
        let ds = d.samples();
        let (best, _) = (0..800)
            .map(|lag| {
                let c: f64 = (lag..ds.len())
                    .map(|n| ds[n] as f64 * xs[n - lag] as f64)
                    .sum();
                (lag, c)
            })
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        assert_eq!(best, delay_samples(delay_ms, 16_000));
    }
}
