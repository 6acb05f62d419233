//! Streaming suppression: NLMS, features, network, mask, overlap-add.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::audio::AudioSignal;
use crate::error::{Error, Result};
use crate::features::{build_feature, FrameHistory};
use crate::nlms::{nlms_step, NlmsConfig, NlmsState};
use crate::nn::Model;
use crate::pipeline::mask::{apply_mask, dtd_postprocess, psm_target, DtdPosterior, MaskFrame};
use crate::stft::{SpectralFrame, StftConfig, HOP, WINDOW_SIZE};

/// Where the per-frame gains come from.
#[derive(Debug, Clone)]
pub enum MaskSource {
    /// The suppression network.
    Network(Arc<Model>),
    /// Gains of 1: the output is the adaptive filter's error signal.
    AfOnly,
    /// Ideal PSM computed from a near-end reference pushed alongside the
    /// inputs. Only meaningful on synthetic data.
    Oracle,
    Constant(f64),
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub nlms: NlmsConfig,
    /// Confidence for DTD post-processing; `None` disables it.
    pub dtd_gate: Option<f32>,
    pub sample_rate: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            nlms: NlmsConfig::default(),
            dtd_gate: None,
            sample_rate: crate::audio::DEFAULT_SAMPLE_RATE,
        }
    }
}

/// Default confidence when DTD gating is switched on.
pub const DEFAULT_DTD_CONFIDENCE: f32 = 0.9;

/// Per-frame diagnostics, collected when enabled.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTrace {
    pub frame_index: u64,
    pub mask: MaskFrame,
    pub dtd: Option<DtdPosterior>,
}

/// State of one stream.
///
/// Every pushed sample produces one output sample. Output sample `n` is the
/// reconstruction of input sample `n - WINDOW_SIZE`; the first
/// `WINDOW_SIZE` outputs are silence.
#[derive(Debug, Clone)]
pub struct PipelineState {
    cfg: PipelineConfig,
    stft: StftConfig,
    source: MaskSource,
    nlms: NlmsState,
    history: FrameHistory,
    // Sliding analysis windows; they start as silence so frame 0 covers
    // samples [-HOP, HOP).
    mic_win: [f32; WINDOW_SIZE],
    far_win: [f32; WINDOW_SIZE],
    near_win: [f32; WINDOW_SIZE],
    // Samples received but not yet a full hop.
    pending: Vec<[f32; 3]>,
    ola: [f64; WINDOW_SIZE],
    out: VecDeque<f32>,
    frames: u64,
    trace: Option<Vec<FrameTrace>>,
}

impl PipelineState {
    pub fn new(source: MaskSource, cfg: PipelineConfig) -> Result<Self> {
        cfg.nlms.validate().map_err(Error::Config)?;
        if let Some(c) = cfg.dtd_gate {
            if !(0.5..=1.0).contains(&c) {
                return Err(Error::Config(format!(
                    "DTD confidence {c} outside [0.5, 1]"
                )));
            }
        }
        Ok(Self {
            stft: StftConfig::new(cfg.sample_rate),
            nlms: NlmsState::new(cfg.nlms),
            history: FrameHistory::new(),
            mic_win: [0.0; WINDOW_SIZE],
            far_win: [0.0; WINDOW_SIZE],
            near_win: [0.0; WINDOW_SIZE],
            pending: Vec::with_capacity(HOP),
            ola: [0.0; WINDOW_SIZE],
            out: std::iter::repeat_n(0.0, WINDOW_SIZE).collect(),
            frames: 0,
            trace: None,
            source,
            cfg,
        })
    }

    pub fn with_model(model: Arc<Model>) -> Result<Self> {
        Self::new(MaskSource::Network(model), PipelineConfig::default())
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn source(&self) -> &MaskSource {
        &self.source
    }

    pub fn frames_processed(&self) -> u64 {
        self.frames
    }

    pub fn nlms(&self) -> &NlmsState {
        &self.nlms
    }

    /// Starts recording per-frame masks and DTD posteriors.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<FrameTrace> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Processes equal-length chunks and returns as many output samples.
    pub fn process(&mut self, mic: &[f32], farend: &[f32]) -> Result<Vec<f32>> {
        if matches!(self.source, MaskSource::Oracle) {
            return Err(Error::Config(
                "oracle masks need a near-end reference".into(),
            ));
        }
        self.push(mic, farend, None)
    }

    /// Like [`process`](Self::process) with the near-end reference that
    /// oracle masks are computed from.
    pub fn process_with_reference(
        &mut self,
        mic: &[f32],
        farend: &[f32],
        nearend: &[f32],
    ) -> Result<Vec<f32>> {
        if nearend.len() != mic.len() {
            return Err(Error::LengthMismatch {
                left: mic.len(),
                right: nearend.len(),
            });
        }
        self.push(mic, farend, Some(nearend))
    }

    fn push(&mut self, mic: &[f32], farend: &[f32], near: Option<&[f32]>) -> Result<Vec<f32>> {
        if mic.len() != farend.len() {
            return Err(Error::LengthMismatch {
                left: mic.len(),
                right: farend.len(),
            });
        }
        if let Some(bad) = mic
            .iter()
            .chain(farend)
            .chain(near.unwrap_or(&[]))
            .find(|v| !v.is_finite())
        {
            return Err(Error::InvalidAudio(format!(
                "non-finite input sample {bad}"
            )));
        }
        for i in 0..mic.len() {
            let n = near.map_or(0.0, |s| s[i]);
            self.pending.push([mic[i], farend[i], n]);
            if self.pending.len() == HOP {
                self.hop()?;
            }
        }
        Ok(self.out.drain(..mic.len()).collect())
    }

    fn hop(&mut self) -> Result<()> {
        for (c, win) in [&mut self.mic_win, &mut self.far_win, &mut self.near_win]
            .into_iter()
            .enumerate()
        {
            win.copy_within(HOP.., 0);
            for (d, p) in win[WINDOW_SIZE - HOP..].iter_mut().zip(&self.pending) {
                *d = p[c];
            }
        }
        self.pending.clear();

        let idx = self.frames;
        let d = self.stft.analyze(&self.mic_win, idx);
        let u = self.stft.analyze(&self.far_win, idx);
        let e = nlms_step(&d, &u, &mut self.nlms).error;
        self.history.push(&e, &u);

        let (mut mask, dtd) = match &self.source {
            MaskSource::Network(model) => {
                let out = model.forward(&build_feature(&self.history))?;
                (
                    MaskFrame::from_values(&out.mask),
                    Some(DtdPosterior(out.dtd)),
                )
            }
            MaskSource::AfOnly => (MaskFrame::constant(1.0), None),
            MaskSource::Constant(v) => (MaskFrame::constant(*v), None),
            MaskSource::Oracle => {
                let s = self.stft.analyze(&self.near_win, idx);
                (psm_target(&s, &e), None)
            }
        };
        if let (Some(conf), Some(post)) = (self.cfg.dtd_gate, dtd.as_ref()) {
            mask = dtd_postprocess(&mask, post, conf);
        }
        debug_assert!(mask.is_bounded());
        if let Some(trace) = self.trace.as_mut() {
            trace.push(FrameTrace {
                frame_index: idx,
                mask,
                dtd,
            });
        }

        let block = self.stft.synthesize(&apply_mask(&e, &mask));
        for (o, b) in self.ola.iter_mut().zip(block) {
            *o += b;
        }
        // The first completed hop is the silent lead-in before sample 0;
        // the output queue already holds its zeros.
        if idx > 0 {
            self.out.extend(self.ola[..HOP].iter().map(|&v| v as f32));
        }
        self.ola.copy_within(HOP.., 0);
        self.ola[WINDOW_SIZE - HOP..].fill(0.0);
        self.frames += 1;
        Ok(())
    }

    /// Pushes silence until every sample already received has been
    /// emitted, returning the tail.
    pub fn flush(&mut self) -> Result<Vec<f32>> {
        let zeros = vec![0.0; WINDOW_SIZE];
        let near = matches!(self.source, MaskSource::Oracle).then_some(zeros.as_slice());
        self.push(&zeros, &zeros, near)
    }
}

fn check_lengths(a: &AudioSignal, b: &AudioSignal) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.sample_rate() != b.sample_rate() {
        return Err(Error::InvalidAudio(format!(
            "sample rates differ: {} vs {}",
            a.sample_rate(),
            b.sample_rate()
        )));
    }
    Ok(())
}

/// Whole-signal processing with the latency removed: output sample `n`
/// is the estimate for input sample `n`, and the length is unchanged.
pub fn process_signal(
    mic: &AudioSignal,
    farend: &AudioSignal,
    state: &mut PipelineState,
) -> Result<AudioSignal> {
    check_lengths(mic, farend)?;
    let mut out = state.process(mic.samples(), farend.samples())?;
    out.extend(state.flush()?);
    AudioSignal::new(out.split_off(WINDOW_SIZE), mic.sample_rate())
}

/// [`process_signal`] for oracle masks.
pub fn process_signal_with_reference(
    mic: &AudioSignal,
    farend: &AudioSignal,
    nearend: &AudioSignal,
    state: &mut PipelineState,
) -> Result<AudioSignal> {
    check_lengths(mic, farend)?;
    check_lengths(mic, nearend)?;
    let mut out =
        state.process_with_reference(mic.samples(), farend.samples(), nearend.samples())?;
    out.extend(state.flush()?);
    AudioSignal::new(out.split_off(WINDOW_SIZE), mic.sample_rate())
}

/// The adaptive filter's error signal `e(n)`, aligned with the input.
pub fn af_output(mic: &AudioSignal, farend: &AudioSignal, nlms: NlmsConfig) -> Result<AudioSignal> {
    let cfg = PipelineConfig {
        nlms,
        sample_rate: mic.sample_rate(),
        ..PipelineConfig::default()
    };
    process_signal(
        mic,
        farend,
        &mut PipelineState::new(MaskSource::AfOnly, cfg)?,
    )
}

/// Frame-level adaptive filter output over a whole signal.
pub fn af_frames(
    mic: &AudioSignal,
    farend: &AudioSignal,
    nlms: NlmsConfig,
) -> Result<Vec<SpectralFrame>> {
    check_lengths(mic, farend)?;
    let cfg = StftConfig::new(mic.sample_rate());
    let d = crate::stft::stft(mic, &cfg)?;
    let u = crate::stft::stft(farend, &cfg)?;
    let mut state = NlmsState::new(nlms);
    Ok(d.iter()
        .zip(&u)
        .map(|(d, u)| nlms_step(d, u, &mut state).error)
        .collect())
}
