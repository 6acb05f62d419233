//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use raes::audio::write_wav;
use raes::synth::sources::{music_like, speech_like};
use raes::AudioSignal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FS: u32 = 16_000;

/// Small source corpus: far-end and near-end speech-like clips plus music.
pub fn write_corpus(root: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let far = root.join("far");
    let near = root.join("near");
    let music = root.join("music");
    for d in [&far, &near, &music] {
        std::fs::create_dir_all(d).unwrap();
    }
    for i in 0..6u64 {
        let len = FS as usize * 3 / 2 + 1000 * i as usize;
        write_wav(
            far.join(format!("f{i}.wav")),
            &speech_like(len, FS, 100 + i),
        )
        .unwrap();
        write_wav(
            near.join(format!("n{i}.wav")),
            &speech_like(len + 8000, FS, 200 + i),
        )
        .unwrap();
    }
    for i in 0..2u64 {
        write_wav(
            music.join(format!("m{i}.wav")),
            &music_like(FS as usize * 2, FS, 300 + i),
        )
        .unwrap();
    }
    (far, near, music)
}

/// Writes a synthesis config next to the corpus, with relative paths.
pub fn write_config(root: &Path, name: &str, count: usize, seed: u64, extra: &str) -> PathBuf {
    let path = root.join(format!("{name}.json"));
    let text = format!(
        r#"{{"farend_dirs":["far"],"nearend_dirs":["near"],"music_dirs":["music"],
            "count":{count},"seed":{seed},"output_dir":"{name}"{extra}}}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

/// White-noise far end and a mic carrying `gain * far[n - delay]`.
pub fn linear_echo(seconds: f64, gain: f32, delay: usize, seed: u64) -> (AudioSignal, AudioSignal) {
    let n = (seconds * FS as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let far: Vec<f32> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let mic: Vec<f32> = (0..n)
        .map(|i| {
            if i >= delay {
                gain * far[i - delay]
            } else {
                0.0
            }
        })
        .collect();
    (
        AudioSignal::new(mic, FS).unwrap(),
        AudioSignal::new(far, FS).unwrap(),
    )
}

pub fn energy_db(x: &[f32]) -> f64 {
    10.0 * x.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().log10()
}

/// ERLE of `out` against `mic` over samples `[from, to)`, computed directly.
pub fn erle_window(mic: &[f32], out: &[f32], from: usize, to: usize) -> f64 {
    energy_db(&mic[from..to]) - energy_db(&out[from..to])
}
