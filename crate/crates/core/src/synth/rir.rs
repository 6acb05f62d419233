//! Image-method room impulse responses and FFT convolution.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::AudioSignal;
use crate::error::{Error, Result};

pub const SPEED_OF_SOUND: f64 = 343.0;

/// Reverberation times and their impulse response lengths.
pub const RT60_LENGTHS: [(f64, usize); 4] = [(0.3, 2048), (0.4, 2048), (0.5, 4096), (0.6, 4096)];

/// Rooms used for simulated responses unless the config overrides them.
pub const DEFAULT_ROOMS: [[f64; 3]; 2] = [[6.5, 4.1, 2.95], [4.2, 3.83, 2.75]];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub dims: [f64; 3],
    pub source: [f64; 3],
    pub mic: [f64; 3],
    pub rt60: f64,
    pub rir_length: usize,
}

impl RoomSpec {
    /// Validates positions and picks the response length for `rt60`.
    pub fn new(dims: [f64; 3], source: [f64; 3], mic: [f64; 3], rt60: f64) -> Result<Self> {
        let rir_length = RT60_LENGTHS
            .iter()
            .find(|(t, _)| (t - rt60).abs() < 1e-9)
            .map(|&(_, n)| n)
            .ok_or_else(|| Error::Config(format!("rt60 {rt60} not one of 0.3, 0.4, 0.5, 0.6 s")))?;
        let room = Self {
            dims,
            source,
            mic,
            rt60,
            rir_length,
        };
        room.validate()?;
        Ok(room)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::Config(format!("invalid room size {:?}", self.dims)));
        }
        for (what, p) in [("source", self.source), ("microphone", self.mic)] {
            if p.iter().zip(self.dims).any(|(&x, d)| !(x > 0.0 && x < d)) {
                return Err(Error::OutsideRoom(format!(
                    "{what} at {p:?} not inside room {:?}",
                    self.dims
                )));
            }
        }
        Ok(())
    }

    pub fn distance(&self) -> f64 {
        dist(self.source, self.mic)
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Uniform absorption coefficient from Sabine's relation
/// `RT60 = 0.161 V / (S alpha)`, capped at 1.
pub fn sabine_absorption(dims: [f64; 3], rt60: f64) -> f64 {
    let [a, b, c] = dims;
    let volume = a * b * c;
    let surface = 2.0 * (a * b + a * c + b * c);
    (0.161 * volume / (surface * rt60)).min(1.0)
}

/// How the uniform wall absorption is derived from the target RT60.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsorptionModel {
    /// Sabine's relation alone. Rectangular image-source responses decay
    /// noticeably slower than the target with it.
    Sabine,
    /// Sabine's value refined until the response's Schroeder T20 matches
    /// the target.
    #[default]
    Calibrated,
}

/// Image-method response with calibrated absorption.
pub fn generate_rir(room: &RoomSpec, sample_rate: u32) -> Result<Vec<f64>> {
    Ok(generate_rir_with(room, sample_rate, AbsorptionModel::default())?.0)
}

/// Returns the response and the absorption coefficient used.
pub fn generate_rir_with(
    room: &RoomSpec,
    sample_rate: u32,
    model: AbsorptionModel,
) -> Result<(Vec<f64>, f64)> {
    room.validate()?;
    let alpha = match model {
        AbsorptionModel::Sabine => sabine_absorption(room.dims, room.rt60),
        AbsorptionModel::Calibrated => calibrated_absorption(room, sample_rate)?,
    };
    Ok((
        image_method(room, alpha, sample_rate, room.rir_length)?,
        alpha,
    ))
}

struct Image {
    tap: usize,
    reflections: i32,
    amplitude: f64,
}

fn images(room: &RoomSpec, sample_rate: u32, length: usize) -> Vec<Image> {
    let fs = sample_rate as f64;
    let max_dist = SPEED_OF_SOUND * length as f64 / fs;
    let n_max: Vec<i64> = room
        .dims
        .iter()
        .map(|&d| (max_dist / (2.0 * d)).ceil() as i64 + 1)
        .collect();
    let mut out = Vec::new();
    for nx in -n_max[0]..=n_max[0] {
        for ny in -n_max[1]..=n_max[1] {
            for nz in -n_max[2]..=n_max[2] {
                let n = [nx, ny, nz];
                for parity in 0..8u8 {
                    let mut pos = [0.0; 3];
                    let mut reflections = 0i64;
                    for axis in 0..3 {
                        let q = ((parity >> axis) & 1) as i64;
                        let l = room.dims[axis];
                        // Image coordinate along one axis and the number of
                        // wall bounces it stands for.
                        pos[axis] =
                            (1 - 2 * q) as f64 * room.source[axis] + 2.0 * n[axis] as f64 * l;
                        reflections += (n[axis] - q).abs() + n[axis].abs();
                    }
                    let d = dist(pos, room.mic);
                    let tap = (d / SPEED_OF_SOUND * fs).round() as usize;
                    if d >= max_dist || tap >= length {
                        continue;
                    }
                    out.push(Image {
                        tap,
                        reflections: reflections as i32,
                        amplitude: 1.0 / (4.0 * std::f64::consts::PI * d.max(1e-3)),
                    });
                }
            }
        }
    }
    out
}

fn render(images: &[Image], beta: f64, length: usize) -> Vec<f64> {
    let mut h = vec![0.0; length];
    for im in images {
        let gain = if im.reflections == 0 {
            1.0
        } else {
            beta.powi(im.reflections)
        };
        h[im.tap] += gain * im.amplitude;
    }
    h
}

/// Allen-Berkley image source model with wall reflection coefficient
/// `sqrt(1 - absorption)`, nearest-sample placement and `1 / (4 pi d)`
/// spreading loss.
pub fn image_method(
    room: &RoomSpec,
    absorption: f64,
    sample_rate: u32,
    length: usize,
) -> Result<Vec<f64>> {
    room.validate()?;
    if !(0.0..=1.0).contains(&absorption) {
        return Err(Error::Config(format!(
            "absorption {absorption} outside [0, 1]"
        )));
    }
    Ok(render(
        &images(room, sample_rate, length),
        (1.0 - absorption).sqrt(),
        length,
    ))
}

/// RT60 extrapolated from the -5 to -25 dB span of the Schroeder curve.
pub fn schroeder_t20(h: &[f64], sample_rate: u32) -> Option<f64> {
    let mut acc = 0.0;
    let mut edc: Vec<f64> = h
        .iter()
        .rev()
        .map(|v| {
            acc += v * v;
            acc
        })
        .collect();
    edc.reverse();
    let total = *edc.first()?;
    if total <= 0.0 {
        return None;
    }
    let t5 = edc.iter().position(|&e| e <= total * 10f64.powf(-0.5))?;
    let t25 = edc.iter().position(|&e| e <= total * 10f64.powf(-2.5))?;
    Some(3.0 * (t25 - t5) as f64 / sample_rate as f64)
}

/// Bisection on the absorption coefficient so that the T20 of a response
/// long enough to show the decay equals `room.rt60`.
pub fn calibrated_absorption(room: &RoomSpec, sample_rate: u32) -> Result<f64> {
    room.validate()?;
    let length = (room.rt60 * sample_rate as f64).ceil() as usize;
    let imgs = images(room, sample_rate, length);
    let t20 = |alpha: f64| schroeder_t20(&render(&imgs, (1.0 - alpha).sqrt(), length), sample_rate);
    let (mut lo, mut hi) = (1e-3, 0.999);
    let start = sabine_absorption(room.dims, room.rt60).clamp(lo, hi);
    // Decay time falls as absorption rises.
    match t20(start) {
        Some(t) if t > room.rt60 => lo = start,
        _ => hi = start,
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        match t20(mid) {
            Some(t) if t > room.rt60 => lo = mid,
            _ => hi = mid,
        }
        if hi - lo < 1e-5 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Linear convolution truncated to the input length.
pub fn convolve_rir(u: &AudioSignal, rir: &[f64]) -> AudioSignal {
    let out = convolve_truncated(u.samples(), rir);
    AudioSignal::from_f64(&out, u.sample_rate()).expect("finite convolution")
}

/// FFT overlap-add; equals the direct sum up to rounding.
pub fn convolve_truncated(x: &[f32], h: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 || h.is_empty() {
        return vec![0.0; n];
    }
    if h.len() <= 64 {
        return (0..n)
            .map(|i| {
                (0..h.len().min(i + 1))
                    .map(|k| h[k] * x[i - k] as f64)
                    .sum()
            })
            .collect();
    }
    let block = h.len().next_power_of_two().max(256);
    let size = 2 * block;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);

    // Frequency response of the filter, split into block-sized partitions
    // when it is longer than one block.
    let parts: Vec<Vec<Complex64>> = h
        .chunks(block)
        .map(|p| {
            let mut buf = vec![Complex64::new(0.0, 0.0); size];
            for (b, &v) in buf.iter_mut().zip(p) {
                b.re = v;
            }
            fwd.process(&mut buf);
            buf
        })
        .collect();

    let mut out = vec![0.0; n + size];
    let scale = 1.0 / size as f64;
    for (bi, xb) in x.chunks(block).enumerate() {
        let mut xf = vec![Complex64::new(0.0, 0.0); size];
        for (b, &v) in xf.iter_mut().zip(xb) {
            b.re = v as f64;
        }
        fwd.process(&mut xf);
        for (pi, hf) in parts.iter().enumerate() {
            let start = (bi + pi) * block;
            if start >= n {
                break;
            }
            let mut y: Vec<Complex64> = xf.iter().zip(hf).map(|(a, b)| a * b).collect();
            inv.process(&mut y);
            for (o, v) in out[start..start + size].iter_mut().zip(&y) {
                *o += v.re * scale;
            }
        }
    }
    out.truncate(n);
    out
}
