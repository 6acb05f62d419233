//! Phase-sensitive masks and double-talk post-processing.

use crate::stft::{SpectralFrame, NUM_BINS};

/// Denominator guard for the PSM ratio.
pub const PSM_EPS: f64 = 1e-9;

/// Per-bin real gains in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskFrame {
    pub g: [f64; NUM_BINS],
}

impl MaskFrame {
    pub fn constant(value: f64) -> Self {
        Self {
            g: [value.clamp(0.0, 1.0); NUM_BINS],
        }
    }

    /// Clamps every value into [0, 1]; NaN becomes 0.
    pub fn from_values(values: &[f32]) -> Self {
        assert_eq!(values.len(), NUM_BINS, "mask needs {NUM_BINS} values");
        let mut g = [0.0; NUM_BINS];
        for (o, &v) in g.iter_mut().zip(values) {
            *o = if v.is_nan() {
                0.0
            } else {
                (v as f64).clamp(0.0, 1.0)
            };
        }
        Self { g }
    }

    pub fn is_bounded(&self) -> bool {
        self.g.iter().all(|v| (0.0..=1.0).contains(v))
    }
}

/// Double-talk state of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum DtdLabel {
    NearEnd = 0,
    FarEnd = 1,
    DoubleTalk = 2,
}

impl DtdLabel {
    pub fn from_index(i: u8) -> Option<Self> {
        match i {
            0 => Some(Self::NearEnd),
            1 => Some(Self::FarEnd),
            2 => Some(Self::DoubleTalk),
            _ => None,
        }
    }

    pub fn index(self) -> u8 {
        self as u8
    }
}

/// Probabilities over [`DtdLabel`] in index order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtdPosterior(pub [f32; 3]);

impl DtdPosterior {
    pub fn argmax(&self) -> (DtdLabel, f32) {
        let mut best = 0;
        for i in 1..3 {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        (DtdLabel::from_index(best as u8).unwrap(), self.0[best])
    }
}

/// clamp(|S| / max(|E|, eps) * cos(angle S - angle E), 0, 1) per bin.
pub fn psm_target(s: &SpectralFrame, e: &SpectralFrame) -> MaskFrame {
    let mut g = [0.0; NUM_BINS];
    for (k, o) in g.iter_mut().enumerate() {
        let (sv, ev) = (s.bins[k], e.bins[k]);
        let (s_abs, e_abs) = (sv.norm(), ev.norm());
        if s_abs == 0.0 {
            continue;
        }
        // cos of the phase difference without calling atan2.
        let cos = if e_abs == 0.0 {
            1.0
        } else {
            (sv.re * ev.re + sv.im * ev.im) / (s_abs * e_abs)
        };
        *o = (s_abs / e_abs.max(PSM_EPS) * cos).clamp(0.0, 1.0);
    }
    MaskFrame { g }
}

/// Scales each bin of `e` by its gain. The carried DC coefficient follows
/// the lowest working bin.
pub fn apply_mask(e: &SpectralFrame, mask: &MaskFrame) -> SpectralFrame {
    let mut out = *e;
    for (b, &g) in out.bins.iter_mut().zip(mask.g.iter()) {
        *b *= g;
    }
    out.dc *= mask.g[0];
    out
}

/// Forces the mask to 0 on confident far-end single talk and to 1 on
/// confident near-end single talk.
pub fn dtd_postprocess(mask: &MaskFrame, dtd: &DtdPosterior, confidence: f32) -> MaskFrame {
    let (label, p) = dtd.argmax();
    if p < confidence {
        return *mask;
    }
    match label {
        DtdLabel::FarEnd => MaskFrame::constant(0.0),
        DtdLabel::NearEnd => MaskFrame::constant(1.0),
        DtdLabel::DoubleTalk => *mask,
    }
}
