//! End-to-end suppression pipeline and the mask arithmetic it uses.

pub mod mask;
pub mod stream;

pub use mask::{
    apply_mask, dtd_postprocess, psm_target, DtdLabel, DtdPosterior, MaskFrame, PSM_EPS,
};
pub use stream::{
    af_output, process_signal, process_signal_with_reference, FrameTrace, MaskSource,
    PipelineConfig, PipelineState, DEFAULT_DTD_CONFIDENCE,
};
