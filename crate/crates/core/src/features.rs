//! Network input features: causal stacks of log-magnitude spectra.
//!
//! The last 20 frames of the filter output `e` and the far-end reference
//! `u` form a 2 x 20 x 64 block, which is laid out as 2 x 40 x 32: frame `i`
//! (0 = oldest) owns rows `2i` (bins 0..32) and `2i + 1` (bins 32..64).

use std::collections::VecDeque;

use crate::stft::{SpectralFrame, NUM_BINS};

pub const CONTEXT_FRAMES: usize = 20;
pub const CHANNELS: usize = 2;
pub const ROWS: usize = 2 * CONTEXT_FRAMES;
pub const COLS: usize = NUM_BINS / 2;
pub const FEATURE_LEN: usize = CHANNELS * ROWS * COLS;

pub const LOG_EPS: f64 = 1e-7;

pub type LogSpectrum = [f64; NUM_BINS];

/// ln(|X(l,k)| + 1e-7) over the 64 working bins.
pub fn log_spectrum(frame: &SpectralFrame) -> LogSpectrum {
    let mut out = [0.0; NUM_BINS];
    for (o, b) in out.iter_mut().zip(frame.bins.iter()) {
        *o = (b.norm() + LOG_EPS).ln();
    }
    out
}

/// Value used for frames that precede the start of the stream.
pub fn silence_fill() -> f64 {
    LOG_EPS.ln()
}

/// Maps (channel, frame, bin) of the stacked spectra to (channel, row, col).
pub fn feature_position(frame: usize, bin: usize) -> (usize, usize) {
    debug_assert!(frame < CONTEXT_FRAMES && bin < NUM_BINS);
    (2 * frame + bin / COLS, bin % COLS)
}

/// Inverse of [`feature_position`].
pub fn stacked_position(row: usize, col: usize) -> (usize, usize) {
    (row / 2, (row % 2) * COLS + col)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    /// Row-major `[channel][row][col]`.
    pub data: Vec<f32>,
    /// Index of the newest frame that contributed.
    pub frame_index: u64,
}

impl FeatureTensor {
    pub fn shape(&self) -> [usize; 3] {
        [CHANNELS, ROWS, COLS]
    }

    pub fn get(&self, channel: usize, row: usize, col: usize) -> f32 {
        self.data[(channel * ROWS + row) * COLS + col]
    }
}

/// Ring of the last 20 log-spectra for both channels.
#[derive(Debug, Clone)]
pub struct FrameHistory {
    error: VecDeque<LogSpectrum>,
    farend: VecDeque<LogSpectrum>,
    frames_seen: u64,
}

impl Default for FrameHistory {
    fn default() -> Self {
        Self::new()
    }
}

impl FrameHistory {
    pub fn new() -> Self {
        let fill = [silence_fill(); NUM_BINS];
        Self {
            error: std::iter::repeat_n(fill, CONTEXT_FRAMES).collect(),
            farend: std::iter::repeat_n(fill, CONTEXT_FRAMES).collect(),
            frames_seen: 0,
        }
    }

    pub fn push(&mut self, error: &SpectralFrame, farend: &SpectralFrame) {
        self.push_log(log_spectrum(error), log_spectrum(farend));
    }

    pub fn push_log(&mut self, error: LogSpectrum, farend: LogSpectrum) {
        self.error.pop_front();
        self.error.push_back(error);
        self.farend.pop_front();
        self.farend.push_back(farend);
        self.frames_seen += 1;
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    pub fn reset(&mut self) {
        *self = Self::new();
    }
}

pub fn build_feature(history: &FrameHistory) -> FeatureTensor {
    let mut data = vec![0.0f32; FEATURE_LEN];
    for (channel, frames) in [&history.error, &history.farend].into_iter().enumerate() {
        // Each frame's 64 bins are exactly two consecutive rows.
        let base = channel * ROWS * COLS;
        for (i, spectrum) in frames.iter().enumerate() {
            let dst = &mut data[base + i * NUM_BINS..base + (i + 1) * NUM_BINS];
            for (d, &s) in dst.iter_mut().zip(spectrum.iter()) {
                *d = s as f32;
            }
        }
    }
    FeatureTensor {
        data,
        frame_index: history.frames_seen.saturating_sub(1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::AudioSignal;
    use crate::stft::{stft, StftConfig, WINDOW_SIZE};
    use num_complex::Complex64;

    #[test]
    fn zero_frame_log_floor() {
        let v = log_spectrum(&SpectralFrame::zeros(0));
        for x in v {
            assert!((x - (-16.118_095_650_958_32)).abs() < 1e-9);
        }
    }

    #[test]
    fn centered_impulse_is_flat() {
        let mut x = vec![0.0f32; WINDOW_SIZE];
        x[WINDOW_SIZE / 2] = 1.0;
        let cfg = StftConfig::default();
        let frame = stft(&AudioSignal::new(x, 16_000).unwrap(), &cfg).unwrap()[0];
        let expected = (cfg.window()[WINDOW_SIZE / 2] + LOG_EPS).ln();
        for v in log_spectrum(&frame) {
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_direct_dft_log_magnitude() {
        let cfg = StftConfig::default();
        let x: Vec<f32> = (0..WINDOW_SIZE)
            .map(|n| ((n * 37 % 101) as f32 / 50.0) - 1.0)
            .collect();
        let frame = stft(&AudioSignal::new(x.clone(), 16_000).unwrap(), &cfg).unwrap()[0];
        let got = log_spectrum(&frame);
        for k in 1..=NUM_BINS {
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, &v) in x.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / WINDOW_SIZE as f64;
                acc += Complex64::from_polar(v as f64 * cfg.window()[t], ang);
            }
            assert!((got[k - 1] - (acc.norm() + LOG_EPS).ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn index_mapping_examples_and_bijection() {
        assert_eq!(feature_position(3, 40), (7, 8));
        let mut seen = vec![false; ROWS * COLS];
        for f in 0..CONTEXT_FRAMES {
            for b in 0..NUM_BINS {
                let (r, c) = feature_position(f, b);
                assert!(!seen[r * COLS + c]);
                seen[r * COLS + c] = true;
                assert_eq!(stacked_position(r, c), (f, b));
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn placement_follows_mapping() {
        let mut h = FrameHistory::new();
        for l in 0..CONTEXT_FRAMES {
            let mut e = [0.0; NUM_BINS];
            let mut u = [0.0; NUM_BINS];
            for b in 0..NUM_BINS {
                e[b] = (l * 1000 + b) as f64;
                u[b] = -((l * 1000 + b) as f64);
            }
            h.push_log(e, u);
        }
        let t = build_feature(&h);
        assert_eq!(t.shape(), [2, 40, 32]);
        assert_eq!(t.data.len(), FEATURE_LEN);
        assert_eq!(t.get(0, 7, 8), 3040.0);
        assert_eq!(t.get(1, 7, 8), -3040.0);
        assert_eq!(t.frame_index, 19);
    }

    #[test]
    fn start_of_stream_is_zero_filled() {
        let mut h = FrameHistory::new();
        h.push(&SpectralFrame::zeros(0), &SpectralFrame::zeros(0));
        let t = build_feature(&h);
        let fill = silence_fill() as f32;
        for c in 0..2 {
            for r in 0..38 {
                for col in 0..COLS {
                    assert_eq!(t.get(c, r, col), fill);
                }
            }
        }
    }

    #[test]
    fn advancing_shifts_rows_by_two() {
        let mut h = FrameHistory::new();
        let next = |h: &mut FrameHistory, v: f64| {
            let mut e = [0.0; NUM_BINS];
            for (b, x) in e.iter_mut().enumerate() {
                *x = v + b as f64;
            }
            h.push_log(e, e);
        };
        for i in 0..25 {
            next(&mut h, i as f64 * 100.0);
        }
        let before = build_feature(&h);
        next(&mut h, 9_999.0);
        let after = build_feature(&h);
        for c in 0..2 {
            for r in 0..38 {
                for col in 0..COLS {
                    assert_eq!(after.get(c, r, col), before.get(c, r + 2, col));
                }
            }
            assert_eq!(after.get(c, 38, 0), 9_999.0);
            assert_eq!(after.get(c, 39, 0), 9_999.0 + 32.0);
        }
    }
}
