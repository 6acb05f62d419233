//! Real-time residual acoustic echo suppression.

pub mod audio;
pub mod error;
pub mod features;
pub mod metrics;
pub mod nlms;
pub mod nn;
pub mod pipeline;
pub mod stft;
pub mod synth;

pub use audio::AudioSignal;
pub use error::{Error, Result};
