//! Short-time objective intelligibility (Taal et al., 2011).
//!
//! Both signals are resampled to 10 kHz, frames where the clean signal is
//! more than 40 dB below its loudest frame are dropped, and 15 one-third
//! octave band envelopes are correlated over 384 ms segments after
//! normalization and clipping at -15 dB signal-to-distortion.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::audio::AudioSignal;
use crate::error::{Error, Result};
use crate::pipeline::DtdLabel;
use crate::synth::labels::sample_labels;

pub const STOI_FS: u32 = 10_000;
const FRAME: usize = 256;
const NFFT: usize = 512;
const BANDS: usize = 15;
const MIN_FREQ: f64 = 150.0;
const SEGMENT: usize = 30;
const BETA_DB: f64 = -15.0;
const DYN_RANGE_DB: f64 = 40.0;
const EPS: f64 = f64::EPSILON;

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Rational resampling by `up / down` with a Kaiser-windowed sinc
/// (beta 5, 10 zero crossings per side), delay compensated.
pub fn resample_poly(x: &[f64], up: usize, down: usize) -> Vec<f64> {
    let g = gcd(up as u32, down as u32) as usize;
    let (up, down) = (up / g, down / g);
    if up == down {
        return x.to_vec();
    }
    let max_rate = up.max(down);
    let half = 10 * max_rate;
    let len = 2 * half + 1;
    let cutoff = 1.0 / max_rate as f64;
    let beta = 5.0;
    let i0b = bessel_i0(beta);
    let h: Vec<f64> = (0..len)
        .map(|i| {
            let t = i as f64 - half as f64;
            let sinc = if t == 0.0 {
                cutoff
            } else {
                (std::f64::consts::PI * cutoff * t).sin() / (std::f64::consts::PI * t)
            };
            let r = t / half as f64;
            let kaiser = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / i0b;
            sinc * kaiser * up as f64
        })
        .collect();
    let out_len = (x.len() * up).div_ceil(down);
    (0..out_len)
        .map(|m| {
            // Position in the zero-stuffed signal, centred on the filter.
            let center = m * down + half;
            let mut acc = 0.0;
            // Taps j with (center - j) divisible by `up` hit input samples.
            let first = center % up;
            let mut j = first;
            while j < len && j <= center {
                let pos = center - j;
                let n = pos / up;
                if n < x.len() {
                    acc += h[j] * x[n];
                }
                j += up;
            }
            acc
        })
        .collect()
}

fn hann(n: usize) -> Vec<f64> {
    // Symmetric Hann of length n + 2 with the zero end points removed.
    (1..=n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n + 1) as f64).cos())
        .collect()
}

fn frames(x: &[f64], w: &[f64], hop: usize) -> Vec<Vec<f64>> {
    if x.len() < w.len() {
        return Vec::new();
    }
    (0..=(x.len() - w.len()) / hop)
        .map(|i| {
            x[i * hop..i * hop + w.len()]
                .iter()
                .zip(w)
                .map(|(a, b)| a * b)
                .collect()
        })
        .collect()
}

fn overlap_add(frames: &[Vec<f64>], hop: usize) -> Vec<f64> {
    if frames.is_empty() {
        return Vec::new();
    }
    let n = frames[0].len();
    let mut out = vec![0.0; (frames.len() - 1) * hop + n];
    for (i, f) in frames.iter().enumerate() {
        for (o, v) in out[i * hop..i * hop + n].iter_mut().zip(f) {
            *o += v;
        }
    }
    out
}

/// Drops frames of `x` more than `range` dB below its loudest, applies the
/// same selection to `y`, and overlap-adds both.
fn remove_silent_frames(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let w = hann(FRAME);
    let hop = FRAME / 2;
    let xf = frames(x, &w, hop);
    let yf = frames(y, &w, hop);
    let energy: Vec<f64> = xf
        .iter()
        .map(|f| 20.0 * (f.iter().map(|v| v * v).sum::<f64>().sqrt() + EPS).log10())
        .collect();
    let max = energy.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let keep: Vec<usize> = (0..xf.len())
        .filter(|&i| energy[i] > max - DYN_RANGE_DB)
        .collect();
    let pick = |f: &[Vec<f64>]| keep.iter().map(|&i| f[i].clone()).collect::<Vec<_>>();
    (overlap_add(&pick(&xf), hop), overlap_add(&pick(&yf), hop))
}

/// One-third octave band matrix over the `NFFT / 2 + 1` bins.
fn third_octave_bands() -> Vec<(usize, usize)> {
    let bins = NFFT / 2 + 1;
    let f: Vec<f64> = (0..bins)
        .map(|i| i as f64 * STOI_FS as f64 / NFFT as f64)
        .collect();
    let nearest = |target: f64| {
        (0..bins)
            .min_by(|&a, &b| (f[a] - target).abs().total_cmp(&(f[b] - target).abs()))
            .unwrap()
    };
    (0..BANDS)
        .map(|k| {
            let lo = MIN_FREQ * 2f64.powf((2.0 * k as f64 - 1.0) / 6.0);
            let hi = MIN_FREQ * 2f64.powf((2.0 * k as f64 + 1.0) / 6.0);
            (nearest(lo), nearest(hi))
        })
        .collect()
}

/// Band envelopes, `[band][frame]`.
fn band_envelopes(x: &[f64], bands: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let w = hann(FRAME);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(NFFT);
    let fr = frames(x, &w, FRAME / 2);
    let mut out = vec![Vec::with_capacity(fr.len()); bands.len()];
    for f in &fr {
        let mut buf = vec![Complex64::new(0.0, 0.0); NFFT];
        for (b, &v) in buf.iter_mut().zip(f) {
            b.re = v;
        }
        fft.process(&mut buf);
        for (o, &(lo, hi)) in out.iter_mut().zip(bands) {
            o.push(buf[lo..hi].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt());
        }
    }
    out
}

fn to_stoi_rate(x: &AudioSignal) -> Vec<f64> {
    let v: Vec<f64> = x.samples().iter().map(|&s| s as f64).collect();
    if x.sample_rate() == STOI_FS {
        v
    } else {
        resample_poly(&v, STOI_FS as usize, x.sample_rate() as usize)
    }
}

/// STOI of `processed` against `clean` over the whole signal.
pub fn stoi(clean: &AudioSignal, processed: &AudioSignal) -> Result<f64> {
    if clean.len() != processed.len() {
        return Err(Error::LengthMismatch {
            left: clean.len(),
            right: processed.len(),
        });
    }
    if clean.sample_rate() != processed.sample_rate() {
        return Err(Error::InvalidAudio("sample rates differ".into()));
    }
    let x = to_stoi_rate(clean);
    let y = to_stoi_rate(processed);
    let (x, y) = remove_silent_frames(&x, &y);
    let bands = third_octave_bands();
    let xe = band_envelopes(&x, &bands);
    let ye = band_envelopes(&y, &bands);
    let n_frames = xe[0].len();
    if n_frames < SEGMENT {
        return Err(Error::SegmentTooShort(format!(
            "{n_frames} analysis frames after silence removal, need {SEGMENT}"
        )));
    }
    let clip = 1.0 + 10f64.powf(-BETA_DB / 20.0);
    let mut total = 0.0;
    let mut count = 0usize;
    for m in SEGMENT..=n_frames {
        for (xb, yb) in xe.iter().zip(&ye) {
            let xs = &xb[m - SEGMENT..m];
            let ys = &yb[m - SEGMENT..m];
            let nx = xs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny = ys.iter().map(|v| v * v).sum::<f64>().sqrt();
            let alpha = nx / (ny + EPS);
            let yp: Vec<f64> = ys
                .iter()
                .zip(xs)
                .map(|(&yv, &xv)| (alpha * yv).min(xv * clip))
                .collect();
            let mx = xs.iter().sum::<f64>() / SEGMENT as f64;
            let my = yp.iter().sum::<f64>() / SEGMENT as f64;
            let xc: Vec<f64> = xs.iter().map(|v| v - mx).collect();
            let yc: Vec<f64> = yp.iter().map(|v| v - my).collect();
            let nxc = xc.iter().map(|v| v * v).sum::<f64>().sqrt() + EPS;
            let nyc = yc.iter().map(|v| v * v).sum::<f64>().sqrt() + EPS;
            total += xc.iter().zip(&yc).map(|(a, b)| a * b).sum::<f64>() / (nxc * nyc);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// STOI over the double-talk samples only; the selected stretches are
/// concatenated before scoring.
pub fn stoi_double_talk(
    clean: &AudioSignal,
    processed: &AudioSignal,
    labels: &[DtdLabel],
) -> Result<f64> {
    if clean.len() != processed.len() {
        return Err(Error::LengthMismatch {
            left: clean.len(),
            right: processed.len(),
        });
    }
    let per_sample = sample_labels(labels, clean.len());
    let pick = |s: &AudioSignal| -> Result<AudioSignal> {
        let v = s
            .samples()
            .iter()
            .zip(&per_sample)
            .filter(|(_, &l)| l == DtdLabel::DoubleTalk)
            .map(|(&v, _)| v)
            .collect();
        AudioSignal::new(v, s.sample_rate())
    };
    stoi(&pick(clean)?, &pick(processed)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::sources::speech_like;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn with_noise(x: &AudioSignal, snr_db: f64, seed: u64) -> AudioSignal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let pn = noise.iter().map(|v| v * v).sum::<f64>();
        let g = (x.energy() / pn / 10f64.powf(snr_db / 10.0)).sqrt();
        let v = x
            .samples()
            .iter()
            .zip(&noise)
            .map(|(&a, &n)| a + (g * n) as f32)
            .collect();
        AudioSignal::new(v, x.sample_rate()).unwrap()
    }

    #[test]
    fn identical_signals_score_one() {
        let x = speech_like(16_000 * 3, 16_000, 1);
        assert!((stoi(&x, &x).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn more_noise_scores_lower() {
        let x = speech_like(16_000 * 3, 16_000, 2);
        let strong = stoi(&x, &with_noise(&x, -5.0, 3)).unwrap();
        let weak = stoi(&x, &with_noise(&x, 20.0, 4)).unwrap();
        assert!(strong < weak, "{strong} vs {weak}");
        assert!(weak > 0.9 && strong < 0.9);
    }

    #[test]
    fn silence_scores_at_floor() {
        let x = speech_like(16_000 * 3, 16_000, 5);
        let v = stoi(&x, &AudioSignal::zeros(x.len(), 16_000)).unwrap();
        assert!(v.abs() < 0.1, "{v}");
    }

    #[test]
    fn short_segment_is_rejected() {
        let x = speech_like(3000, 16_000, 6);
        assert!(matches!(stoi(&x, &x), Err(Error::SegmentTooShort(_))));
    }

    #[test]
    fn resampler_preserves_in_band_tone() {
        let fs = 16_000.0;
        let x: Vec<f64> = (0..16_000)
            .map(|n| (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / fs).sin())
            .collect();
        let y = resample_poly(&x, 5, 8);
        assert_eq!(y.len(), 10_000);
        for (m, &v) in y.iter().enumerate().skip(200).take(9_600) {
            let expected = (2.0 * std::f64::consts::PI * 1000.0 * m as f64 / 10_000.0).sin();
            assert!((v - expected).abs() < 1e-2, "{m}: {v} vs {expected}");
        }
    }

    #[test]
    fn resampler_rejects_out_of_band_tone() {
        let fs = 16_000.0;
        let x: Vec<f64> = (0..16_000)
            .map(|n| (2.0 * std::f64::consts::PI * 7000.0 * n as f64 / fs).sin())
            .collect();
        let y = resample_poly(&x, 5, 8);
        let rms = (y[200..9800].iter().map(|v| v * v).sum::<f64>() / 9600.0).sqrt();
        assert!(rms < 0.01, "{rms}");
    }

    #[test]
    fn band_edges_are_increasing() {
        let b = third_octave_bands();
        assert_eq!(b.len(), 15);
        assert!(b.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
        assert!(b.iter().all(|&(lo, hi)| lo < hi && hi <= NFFT / 2 + 1));
    }
}
