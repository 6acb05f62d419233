//! Mono sample buffers and WAV file I/O.
//!
//! Every signal in the toolkit (microphone, far-end reference, near-end
//! speech, echo, filter output) is an [`AudioSignal`]: finite `f32` samples
//! plus a sample rate. WAV files must be mono at the expected rate; 16-bit
//! PCM and 32-bit float are accepted on input, output is always 32-bit
//! float so that sums of written signals survive a round trip exactly.

use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidAudio("sample rate must be positive".into()));
        }
        if let Some(pos) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidAudio(format!(
                "non-finite sample at index {pos}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    /// Builds a signal from `f64` samples, rounding each to `f32`.
    pub fn from_f64(samples: &[f64], sample_rate: u32) -> Result<Self> {
        Self::new(samples.iter().map(|&s| s as f32).collect(), sample_rate)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f32> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0f32, |m, s| m.max(s.abs()))
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|&s| (s as f64) * (s as f64)).sum()
    }
}

/// Reads a mono WAV file and checks its sample rate.
pub fn read_wav(path: impl AsRef<Path>, expected_rate: u32) -> Result<AudioSignal> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let mut reader = hound::WavReader::open(path).map_err(|source| Error::Wav {
        path: shown.clone(),
        source,
    })?;
    let spec = reader.spec();
    let unsupported = |reason: String| Error::UnsupportedWav {
        path: shown.clone(),
        reason,
    };
    if spec.channels != 1 {
        return Err(unsupported(format!(
            "expected mono, found {} channels",
            spec.channels
        )));
    }
    if spec.sample_rate != expected_rate {
        return Err(unsupported(format!(
            "expected {expected_rate} Hz, found {} Hz",
            spec.sample_rate
        )));
    }
    let wav_err = |source| Error::Wav {
        path: shown.clone(),
        source,
    };
    let samples: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        (format, bits) => {
            return Err(unsupported(format!(
                "unsupported sample format {format:?} at {bits} bits"
            )))
        }
    };
    AudioSignal::new(samples, spec.sample_rate)
}

/// Writes a mono 32-bit float WAV file.
pub fn write_wav(path: impl AsRef<Path>, signal: &AudioSignal) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let wav_err = |source| Error::Wav {
        path: path.display().to_string(),
        source,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in &signal.samples {
        writer.write_sample(s).map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)
}

/// Writes a mono 16-bit PCM WAV file (samples are clamped to [-1, 1]).
pub fn write_wav_pcm16(path: impl AsRef<Path>, signal: &AudioSignal) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wav_err = |source| Error::Wav {
        path: path.display().to_string(),
        source,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wav_err)?;
    for &s in &signal.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(wav_err)?;
    }
    writer.finalize().map_err(wav_err)
}
