//! Subband NLMS echo canceller operating on STFT bins.
//!
//! Each of the 64 bins carries its own complex FIR over the last
//! `taps_per_bin` far-end frames:
//!
//! ```text
//! y_hat(l,k) = sum_j taps[k][j] * U(l-j,k)
//! e(l,k)     = D(l,k) - y_hat(l,k)
//! taps[k][j] += mu * conj(U(l-j,k)) * e(l,k) / (||U(.,k)||^2 + delta)
//! ```
//!
//! Adaptation is skipped for frames whose far-end energy is below the
//! freeze threshold.

use num_complex::Complex64;

use crate::stft::{SpectralFrame, NUM_BINS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlmsConfig {
    pub taps_per_bin: usize,
    pub step_size: f64,
    pub regularization: f64,
    /// Far-end frame energy below which the taps are not updated.
    pub freeze_threshold: f64,
}

impl Default for NlmsConfig {
    fn default() -> Self {
        Self {
            taps_per_bin: 16,
            step_size: 0.5,
            regularization: 1e-6,
            freeze_threshold: 1e-8,
        }
    }
}

impl NlmsConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.taps_per_bin == 0 {
            return Err("taps_per_bin must be at least 1".into());
        }
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return Err(format!("step size {} outside (0, 1]", self.step_size));
        }
        if self.regularization.is_nan() || self.regularization <= 0.0 {
            return Err("regularization must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NlmsState {
    cfg: NlmsConfig,
    /// `taps[k * T + j]` weights far-end frame `l - j` in bin `k`.
    taps: Vec<Complex64>,
    /// Same layout as `taps`; index 0 of each bin is the newest frame.
    history: Vec<Complex64>,
    adapt: bool,
    frames: u64,
}

impl NlmsState {
    pub fn new(cfg: NlmsConfig) -> Self {
        cfg.validate().expect("invalid NLMS configuration");
        let n = cfg.taps_per_bin * NUM_BINS;
        Self {
            cfg,
            taps: vec![Complex64::new(0.0, 0.0); n],
            history: vec![Complex64::new(0.0, 0.0); n],
            adapt: true,
            frames: 0,
        }
    }

    pub fn config(&self) -> &NlmsConfig {
        &self.cfg
    }

    /// Enables or disables tap updates; filtering continues either way.
    pub fn set_adaptation(&mut self, enabled: bool) {
        self.adapt = enabled;
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn frames_processed(&self) -> u64 {
        self.frames
    }

    pub fn reset(&mut self) {
        self.taps.fill(Complex64::new(0.0, 0.0));
        self.history.fill(Complex64::new(0.0, 0.0));
        self.frames = 0;
    }
}

/// Output of one adaptive filtering step.
#[derive(Debug, Clone, Copy)]
pub struct NlmsOutput {
    pub error: SpectralFrame,
    pub echo_estimate: SpectralFrame,
}

pub fn nlms_step(mic: &SpectralFrame, farend: &SpectralFrame, state: &mut NlmsState) -> NlmsOutput {
    let t = state.cfg.taps_per_bin;
    let update = state.adapt && farend.energy() >= state.cfg.freeze_threshold;
    let mu = state.cfg.step_size;
    let delta = state.cfg.regularization;

    let mut error = SpectralFrame::zeros(mic.frame_index);
    let mut echo = SpectralFrame::zeros(mic.frame_index);
    // The DC coefficient is not filtered.
    error.dc = mic.dc;

    for k in 0..NUM_BINS {
        let hist = &mut state.history[k * t..(k + 1) * t];
        hist.rotate_right(1);
        hist[0] = farend.bins[k];
        let taps = &mut state.taps[k * t..(k + 1) * t];

        let mut y_hat = Complex64::new(0.0, 0.0);
        let mut power = 0.0;
        for (w, u) in taps.iter().zip(hist.iter()) {
            y_hat += w * u;
            power += u.norm_sqr();
        }
        let e = mic.bins[k] - y_hat;
        echo.bins[k] = y_hat;
        error.bins[k] = e;

        if update {
            let g = e * (mu / (power + delta));
            for (w, u) in taps.iter_mut().zip(hist.iter()) {
                *w += u.conj() * g;
            }
        }
    }
    state.frames += 1;
    NlmsOutput {
        error,
        echo_estimate: echo,
    }
}
