//! Frame-level double-talk labels.

use serde::{Deserialize, Serialize};

use crate::audio::AudioSignal;
use crate::error::{Error, Result};
use crate::pipeline::DtdLabel;
use crate::stft::{SpectralFrame, StftConfig, HOP, WINDOW_SIZE};

/// Peak spectral magnitude above which a frame counts as active.
pub const ACTIVITY_THRESHOLD: f64 = 0.001;

fn peak(frame: &SpectralFrame) -> f64 {
    frame.bins.iter().map(|b| b.norm()).fold(0.0, f64::max)
}

/// Per-frame activity of a signal under the labeling rule.
pub fn frame_activity(x: &AudioSignal, cfg: &StftConfig) -> Vec<bool> {
    let n = cfg.frame_count(x.len());
    (0..n)
        .map(|l| {
            peak(&cfg.analyze(&x.samples()[l * HOP..l * HOP + WINDOW_SIZE], l as u64))
                > ACTIVITY_THRESHOLD
        })
        .collect()
}

/// Label rule applied to the peak magnitudes of one frame.
pub fn label_frame(s_peak: f64, y_peak: f64) -> DtdLabel {
    if y_peak < ACTIVITY_THRESHOLD && s_peak > ACTIVITY_THRESHOLD {
        DtdLabel::NearEnd
    } else if s_peak < ACTIVITY_THRESHOLD && y_peak > ACTIVITY_THRESHOLD {
        DtdLabel::FarEnd
    } else {
        DtdLabel::DoubleTalk
    }
}

/// One label per STFT frame of `s` and `y`.
pub fn dtd_labels(s: &AudioSignal, y: &AudioSignal, cfg: &StftConfig) -> Result<Vec<DtdLabel>> {
    if s.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: s.len(),
            right: y.len(),
        });
    }
    let n = cfg.frame_count(s.len());
    Ok((0..n)
        .map(|l| {
            let r = l * HOP..l * HOP + WINDOW_SIZE;
            let sp = peak(&cfg.analyze(&s.samples()[r.clone()], l as u64));
            let yp = peak(&cfg.analyze(&y.samples()[r], l as u64));
            label_frame(sp, yp)
        })
        .collect())
}

/// Frames labeled double talk because neither signal is active.
pub fn mutual_silence(s: &AudioSignal, y: &AudioSignal, cfg: &StftConfig) -> Vec<bool> {
    frame_activity(s, cfg)
        .into_iter()
        .zip(frame_activity(y, cfg))
        .map(|(a, b)| !a && !b)
        .collect()
}

/// Label of the frame a sample is attributed to: sample `n` belongs to
/// frame `n / hop`, with the tail assigned to the last frame.
pub fn sample_labels(labels: &[DtdLabel], len: usize) -> Vec<DtdLabel> {
    if labels.is_empty() {
        return vec![DtdLabel::DoubleTalk; len];
    }
    (0..len)
        .map(|n| labels[(n / HOP).min(labels.len() - 1)])
        .collect()
}

/// Run of identical labels, as stored in the manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRun {
    pub label: u8,
    pub frames: u32,
}

pub fn run_length_encode(labels: &[DtdLabel]) -> Vec<LabelRun> {
    let mut runs: Vec<LabelRun> = Vec::new();
    for &l in labels {
        match runs.last_mut() {
            Some(r) if r.label == l.index() => r.frames += 1,
            _ => runs.push(LabelRun {
                label: l.index(),
                frames: 1,
            }),
        }
    }
    runs
}

pub fn run_length_decode(runs: &[LabelRun]) -> Result<Vec<DtdLabel>> {
    let mut out = Vec::new();
    for r in runs {
        let l = DtdLabel::from_index(r.label)
            .ok_or_else(|| Error::Config(format!("invalid DTD label {}", r.label)))?;
        out.extend(std::iter::repeat_n(l, r.frames as usize));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tone(len: usize, amp: f32) -> Vec<f32> {
        (0..len).map(|n| amp * (n as f32 * 0.3).sin()).collect()
    }

    #[test]
    fn single_talk_cases() {
        let cfg = StftConfig::default();
        let s = AudioSignal::new(tone(4096, 0.3), 16_000).unwrap();
        let z = AudioSignal::zeros(4096, 16_000);
        assert!(dtd_labels(&s, &z, &cfg)
            .unwrap()
            .iter()
            .all(|&l| l == DtdLabel::NearEnd));
        assert!(dtd_labels(&z, &s, &cfg)
            .unwrap()
            .iter()
            .all(|&l| l == DtdLabel::FarEnd));
        assert!(dtd_labels(&z, &z, &cfg)
            .unwrap()
            .iter()
            .all(|&l| l == DtdLabel::DoubleTalk));
        assert!(dtd_labels(&s, &s, &cfg)
            .unwrap()
            .iter()
            .all(|&l| l == DtdLabel::DoubleTalk));
        assert_eq!(
            dtd_labels(&s, &z, &cfg).unwrap().len(),
            cfg.frame_count(4096)
        );
    }

    #[test]
    fn sample_attribution() {
        let l = [DtdLabel::NearEnd, DtdLabel::FarEnd];
        let s = sample_labels(&l, 200);
        assert_eq!(s[63], DtdLabel::NearEnd);
        assert_eq!(s[64], DtdLabel::FarEnd);
        assert_eq!(s[199], DtdLabel::FarEnd);
    }

    proptest! {
        #[test]
        fn rle_round_trip(v in prop::collection::vec(0u8..3, 0..300)) {
            let labels: Vec<_> = v.iter().map(|&i| DtdLabel::from_index(i).unwrap()).collect();
            let runs = run_length_encode(&labels);
            prop_assert!(runs.windows(2).all(|w| w[0].label != w[1].label));
            prop_assert_eq!(run_length_decode(&runs).unwrap(), labels);
        }
    }
}
