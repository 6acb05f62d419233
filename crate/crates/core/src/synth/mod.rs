//! Synthetic training and evaluation data: loudspeaker distortion, echo
//! paths, SER-controlled mixing and double-talk labels.

pub mod dataset;
pub mod labels;
pub mod mix;
pub mod nonlinear;
pub mod rir;
pub mod sources;

pub use dataset::{
    read_manifest, synth_dataset, ManifestRecord, SynthConfig, SynthParams, SynthSummary,
};
pub use labels::dtd_labels;
pub use mix::{measure_ser, mix_at_ser, Mixture};
pub use nonlinear::{apply_delay, hard_clip, loudspeaker_nonlinearity, NonlinearityMode};
pub use rir::{convolve_rir, generate_rir, generate_rir_with, AbsorptionModel, RoomSpec};
