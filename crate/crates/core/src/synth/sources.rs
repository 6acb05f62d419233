//! Synthetic speech-like and music-like signals for tests and demos.
//!
//! Speech-like signals alternate voiced bursts (harmonic series with a
//! drifting pitch and two formant-like emphasis bands) with stretches of
//! exact digital silence, so activity labels have something to find.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::AudioSignal;

pub fn speech_like(len: usize, sample_rate: u32, seed: u64) -> AudioSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = sample_rate as f64;
    let f0_base = rng.gen_range(95.0..230.0);
    let mut out = vec![0.0f32; len];
    let mut n = (rng.gen_range(0.0..0.2) * fs) as usize;
    while n < len {
        let burst = (rng.gen_range(0.12..0.45) * fs) as usize;
        let end = (n + burst).min(len);
        let f0 = f0_base * rng.gen_range(0.85..1.2);
        let glide = rng.gen_range(-0.3..0.3);
        let formants = [rng.gen_range(350.0..900.0), rng.gen_range(1000.0..2600.0)];
        let amp = rng.gen_range(0.2..0.5);
        let noise_mix = rng.gen_range(0.0..0.15);
        let mut phase = 0.0f64;
        for (i, o) in out[n..end].iter_mut().enumerate() {
            let t = i as f64 / burst as f64;
            let f = f0 * (1.0 + glide * t);
            phase += 2.0 * std::f64::consts::PI * f / fs;
            let mut v = 0.0;
            let mut h = 1;
            while (h as f64) * f < fs / 2.0 - 200.0 && h <= 40 {
                let fh = h as f64 * f;
                let w: f64 = formants
                    .iter()
                    .map(|&fc| 1.0 / (1.0 + ((fh - fc) / 250.0).powi(2)))
                    .sum();
                v += (w + 0.05) / h as f64 * (h as f64 * phase).sin();
                h += 1;
            }
            v += noise_mix * rng.gen_range(-1.0..1.0);
            // Raised-cosine envelope so bursts start and stop smoothly.
            let env = (std::f64::consts::PI * t).sin().powf(0.6);
            *o = (amp * env * v * 0.5) as f32;
        }
        n = end + (rng.gen_range(0.08..0.4) * fs) as usize;
    }
    normalize(out, 0.6, sample_rate)
}

/// Sustained chords with a percussive noise layer; no silences.
pub fn music_like(len: usize, sample_rate: u32, seed: u64) -> AudioSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs = sample_rate as f64;
    let mut out = vec![0.0f32; len];
    let beat = (rng.gen_range(0.3..0.6) * fs) as usize;
    let mut start = 0;
    while start < len {
        let end = (start + 4 * beat).min(len);
        let root: f64 = 110.0 * 2f64.powf(rng.gen_range(0..12) as f64 / 12.0);
        let chord = [root, root * 1.26, root * 1.5, root * 2.0];
        for (i, o) in out[start..end].iter_mut().enumerate() {
            let t = (start + i) as f64 / fs;
            let mut v: f64 = chord
                .iter()
                .map(|f| (2.0 * std::f64::consts::PI * f * t).sin())
                .sum::<f64>()
                / 4.0;
            let since_beat = (i % beat) as f64 / fs;
            v += 0.3 * (-since_beat * 30.0).exp() * rng.gen_range(-1.0..1.0);
            *o = v as f32;
        }
        start = end;
    }
    normalize(out, 0.6, sample_rate)
}

fn normalize(mut v: Vec<f32>, peak: f32, sample_rate: u32) -> AudioSignal {
    let p = v.iter().fold(0.0f32, |a, &b| a.max(b.abs()));
    if p > 0.0 {
        v.iter_mut().for_each(|x| *x *= peak / p);
    }
    AudioSignal::new(v, sample_rate).unwrap()
}
