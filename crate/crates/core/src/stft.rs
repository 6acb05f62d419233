//! Square-root Hann STFT analysis and overlap-add synthesis.
//!
//! Frames are 128 samples with a 64-sample hop. The 64 working bins are
//! bins 1..=64 of the 128-point transform (DC excluded, Nyquist retained);
//! everything downstream (features, masks, adaptive filter) sees only those.
//! The real DC coefficient rides along in [`SpectralFrame::dc`] so that
//! synthesis can reconstruct the input exactly. Negative frequencies are
//! rebuilt by conjugate symmetry.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::audio::{AudioSignal, DEFAULT_SAMPLE_RATE};
use crate::error::{Error, Result};

pub const WINDOW_SIZE: usize = 128;
pub const HOP: usize = WINDOW_SIZE / 2;
pub const NUM_BINS: usize = WINDOW_SIZE / 2;

/// One hop of spectrum: bins 1..=64 of a 128-point transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralFrame {
    pub bins: [Complex64; NUM_BINS],
    /// DC coefficient of the frame. Not a working bin.
    pub dc: f64,
    pub frame_index: u64,
}

impl SpectralFrame {
    pub fn zeros(frame_index: u64) -> Self {
        Self {
            bins: [Complex64::new(0.0, 0.0); NUM_BINS],
            dc: 0.0,
            frame_index,
        }
    }

    /// Copy with the DC coefficient cleared.
    pub fn without_dc(mut self) -> Self {
        self.dc = 0.0;
        self
    }

    /// Energy of the 64 working bins.
    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|b| b.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.dc.is_finite()
            && self
                .bins
                .iter()
                .all(|b| b.re.is_finite() && b.im.is_finite())
    }
}

/// Analysis/synthesis configuration. Cheap to clone; FFT plans are shared.
#[derive(Clone)]
pub struct StftConfig {
    window: Arc<[f64; WINDOW_SIZE]>,
    sample_rate: u32,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for StftConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StftConfig")
            .field("window_size", &WINDOW_SIZE)
            .field("hop", &HOP)
            .field("sample_rate", &self.sample_rate)
            .finish()
    }
}

impl Default for StftConfig {
    fn default() -> Self {
        Self::new(DEFAULT_SAMPLE_RATE)
    }
}

/// Periodic square-root Hann window; w[n]^2 + w[n + K/2]^2 = 1.
pub fn sqrt_hann() -> [f64; WINDOW_SIZE] {
    let mut w = [0.0; WINDOW_SIZE];
    for (n, v) in w.iter_mut().enumerate() {
        *v = (std::f64::consts::PI * n as f64 / WINDOW_SIZE as f64).sin();
    }
    w
}

impl StftConfig {
    pub fn new(sample_rate: u32) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            window: Arc::new(sqrt_hann()),
            sample_rate,
            forward: planner.plan_fft_forward(WINDOW_SIZE),
            inverse: planner.plan_fft_inverse(WINDOW_SIZE),
        }
    }

    pub fn window_size(&self) -> usize {
        WINDOW_SIZE
    }

    pub fn hop(&self) -> usize {
        HOP
    }

    pub fn window(&self) -> &[f64; WINDOW_SIZE] {
        &self.window
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Number of full frames that fit in `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if len < WINDOW_SIZE {
            0
        } else {
            (len - WINDOW_SIZE) / HOP + 1
        }
    }

    /// Windows and transforms exactly one frame of samples.
    pub fn analyze(&self, samples: &[f32], frame_index: u64) -> SpectralFrame {
        assert_eq!(samples.len(), WINDOW_SIZE, "analysis needs one full window");
        let mut buf = [Complex64::new(0.0, 0.0); WINDOW_SIZE];
        for ((b, &x), &w) in buf.iter_mut().zip(samples).zip(self.window.iter()) {
            *b = Complex64::new(x as f64 * w, 0.0);
        }
        self.forward.process(&mut buf);
        let mut frame = SpectralFrame::zeros(frame_index);
        frame.bins.copy_from_slice(&buf[1..=NUM_BINS]);
        frame.dc = buf[0].re;
        frame
    }

    /// Inverse transform of one frame, multiplied by the synthesis window.
    /// The result is ready to be overlap-added at the frame's position.
    pub fn synthesize(&self, frame: &SpectralFrame) -> [f64; WINDOW_SIZE] {
        let mut buf = [Complex64::new(0.0, 0.0); WINDOW_SIZE];
        buf[0] = Complex64::new(frame.dc, 0.0);
        for k in 1..NUM_BINS {
            buf[k] = frame.bins[k - 1];
            buf[WINDOW_SIZE - k] = frame.bins[k - 1].conj();
        }
        // Nyquist of a real signal is real.
        buf[NUM_BINS] = Complex64::new(frame.bins[NUM_BINS - 1].re, 0.0);
        self.inverse.process(&mut buf);
        let scale = 1.0 / WINDOW_SIZE as f64;
        let mut out = [0.0; WINDOW_SIZE];
        for ((o, b), &w) in out.iter_mut().zip(buf.iter()).zip(self.window.iter()) {
            *o = b.re * scale * w;
        }
        out
    }
}

/// Frame `l` covers samples `[l * hop, l * hop + K)`.
pub fn stft(signal: &AudioSignal, cfg: &StftConfig) -> Result<Vec<SpectralFrame>> {
    let x = signal.samples();
    if x.len() < WINDOW_SIZE {
        return Err(Error::InsufficientSamples {
            needed: WINDOW_SIZE,
            got: x.len(),
        });
    }
    Ok((0..cfg.frame_count(x.len()))
        .map(|l| cfg.analyze(&x[l * HOP..l * HOP + WINDOW_SIZE], l as u64))
        .collect())
}

/// Overlap-add resynthesis. Output length is `(L - 1) * hop + K`; frames are
/// placed by their position in the slice, not by `frame_index`.
pub fn istft(frames: &[SpectralFrame], cfg: &StftConfig) -> Result<AudioSignal> {
    if frames.is_empty() {
        return Err(Error::EmptyFrames);
    }
    let len = (frames.len() - 1) * HOP + WINDOW_SIZE;
    let mut out = vec![0.0f64; len];
    for (l, frame) in frames.iter().enumerate() {
        let block = cfg.synthesize(frame);
        for (o, b) in out[l * HOP..l * HOP + WINDOW_SIZE].iter_mut().zip(block) {
            *o += b;
        }
    }
    AudioSignal::from_f64(&out, cfg.sample_rate)
}
