//! Mixing near-end speech and echo at a target signal-to-echo ratio.

use crate::audio::AudioSignal;
use crate::error::{Error, Result};
use crate::pipeline::DtdLabel;
use crate::stft::StftConfig;
use crate::synth::labels::{dtd_labels, sample_labels};

#[derive(Debug, Clone)]
pub struct Mixture {
    /// Microphone signal `d = s + y`.
    pub d: AudioSignal,
    pub s: AudioSignal,
    pub y: AudioSignal,
    pub s_gain: f64,
    pub y_gain: f64,
    pub labels: Vec<DtdLabel>,
    /// SER over double-talk samples; `None` when the near-end is silent.
    pub measured_ser_db: Option<f64>,
}

fn scaled(x: &AudioSignal, g: f64) -> AudioSignal {
    let v = x.samples().iter().map(|&v| (v as f64 * g) as f32).collect();
    AudioSignal::new(v, x.sample_rate()).unwrap()
}

/// `10 log10(P_s / P_y)` over samples whose frame is labeled double talk.
/// Falls back to the whole signal when no frame is.
pub fn measure_ser(s: &AudioSignal, y: &AudioSignal, labels: &[DtdLabel]) -> Option<f64> {
    let per_sample = sample_labels(labels, s.len());
    let mut ps = 0.0;
    let mut py = 0.0;
    let mut any = false;
    for ((&a, &b), &l) in s.samples().iter().zip(y.samples()).zip(&per_sample) {
        if l == DtdLabel::DoubleTalk {
            ps += a as f64 * a as f64;
            py += b as f64 * b as f64;
            any = true;
        }
    }
    if !any || ps == 0.0 || py == 0.0 {
        ps = s.energy();
        py = y.energy();
    }
    (ps > 0.0 && py > 0.0).then(|| 10.0 * (ps / py).log10())
}

/// Scales `s` to `target_ser_db` against `y` over double-talk frames and
/// returns `d = s + y`. If `d` would clip, both parts are attenuated
/// together and the fit is repeated, since labels depend on level.
pub fn mix_at_ser(
    s: &AudioSignal,
    y: &AudioSignal,
    target_ser_db: f64,
    cfg: &StftConfig,
) -> Result<Mixture> {
    if s.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: s.len(),
            right: y.len(),
        });
    }
    if !target_ser_db.is_finite() {
        return Err(Error::Config(format!(
            "target SER {target_ser_db} not finite"
        )));
    }
    let finish = |s: AudioSignal, y: AudioSignal, s_gain, y_gain, labels, ser| {
        let d: Vec<f32> = s
            .samples()
            .iter()
            .zip(y.samples())
            .map(|(a, b)| a + b)
            .collect();
        Ok(Mixture {
            d: AudioSignal::new(d, s.sample_rate())?,
            s,
            y,
            s_gain,
            y_gain,
            labels,
            measured_ser_db: ser,
        })
    };

    if s.energy() == 0.0 {
        // Far-end single talk.
        let mut y_gain = 1.0;
        let peak = y.peak() as f64;
        if peak > 1.0 {
            y_gain = 0.99 / peak;
        }
        let y2 = scaled(y, y_gain);
        let labels = dtd_labels(s, &y2, cfg)?;
        return finish(s.clone(), y2, 0.0, y_gain, labels, None);
    }
    if y.energy() == 0.0 {
        return Err(Error::DegeneratePower(
            "echo is silent but near-end is not".into(),
        ));
    }

    let mut s_gain = 1.0;
    let mut y_gain = 1.0;
    for _ in 0..50 {
        let ys = scaled(y, y_gain);
        let ss = scaled(s, s_gain);
        let labels = dtd_labels(&ss, &ys, cfg)?;
        let ser = measure_ser(&ss, &ys, &labels)
            .ok_or_else(|| Error::DegeneratePower("no measurable speech or echo power".into()))?;
        let err = target_ser_db - ser;
        let peak = ss
            .samples()
            .iter()
            .zip(ys.samples())
            .map(|(a, b)| (a + b).abs())
            .fold(0.0f32, f32::max) as f64;
        if peak > 1.0 {
            let c = 0.95 / peak;
            s_gain *= c;
            y_gain *= c;
            continue;
        }
        if err.abs() < 0.01 {
            return finish(ss, ys, s_gain, y_gain, labels, Some(ser));
        }
        s_gain *= 10f64.powf(err / 20.0);
    }
    Err(Error::DegeneratePower(format!(
        "could not reach {target_ser_db} dB SER without clipping"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::sources::speech_like;

    #[test]
    fn targets_are_met() {
        let cfg = StftConfig::default();
        for (i, target) in [0.0, -5.0, -13.0, -7.3].into_iter().enumerate() {
            let s = speech_like(16_000 * 3, 16_000, 10 + i as u64);
            let y = speech_like(16_000 * 3, 16_000, 20 + i as u64);
            let m = mix_at_ser(&s, &y, target, &cfg).unwrap();
            let measured = measure_ser(&m.s, &m.y, &m.labels).unwrap();
            assert!((measured - target).abs() < 0.1, "{target}: {measured}");
            for ((d, s), y) in m.d.samples().iter().zip(m.s.samples()).zip(m.y.samples()) {
                assert_eq!(*d, s + y);
                assert!(d.abs() <= 1.0);
            }
        }
    }

    #[test]
    fn silent_nearend_gives_echo_only() {
        let cfg = StftConfig::default();
        let y = speech_like(16_000, 16_000, 1);
        let m = mix_at_ser(&AudioSignal::zeros(16_000, 16_000), &y, -5.0, &cfg).unwrap();
        assert_eq!(m.d, y);
        assert!(m.labels.iter().all(|&l| l != DtdLabel::NearEnd));
        assert_eq!(m.measured_ser_db, None);
    }

    #[test]
    fn loud_inputs_are_rescaled_jointly() {
        let cfg = StftConfig::default();
        let s = speech_like(16_000, 16_000, 3);
        let y = scaled(&speech_like(16_000, 16_000, 4), 1.8);
        let m = mix_at_ser(&s, &y, 0.0, &cfg).unwrap();
        assert!(m.d.peak() <= 1.0);
        assert!(m.y_gain < 1.0);
    }

    #[test]
    fn silent_echo_with_speech_is_degenerate() {
        let cfg = StftConfig::default();
        let s = speech_like(16_000, 16_000, 3);
        assert!(matches!(
            mix_at_ser(&s, &AudioSignal::zeros(16_000, 16_000), 0.0, &cfg),
            Err(Error::DegeneratePower(_))
        ));
    }
}
