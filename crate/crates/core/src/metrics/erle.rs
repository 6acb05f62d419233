//! Echo return loss enhancement.

use crate::audio::AudioSignal;
use crate::error::{Error, Result};
use crate::pipeline::DtdLabel;
use crate::synth::labels::sample_labels;

/// Reported when the residual is digital silence.
pub const ERLE_CAP_DB: f64 = 80.0;

/// `10 log10(sum d^2 / sum r^2)` over the selected samples.
pub fn erle_selected(d: &AudioSignal, residual: &AudioSignal, select: &[bool]) -> Result<f64> {
    if d.len() != residual.len() || d.len() != select.len() {
        return Err(Error::LengthMismatch {
            left: d.len(),
            right: residual.len().min(select.len()),
        });
    }
    let mut ed = 0.0f64;
    let mut er = 0.0f64;
    for ((&a, &b), &s) in d.samples().iter().zip(residual.samples()).zip(select) {
        if s {
            ed += a as f64 * a as f64;
            er += b as f64 * b as f64;
        }
    }
    if ed == 0.0 {
        return Err(Error::NoReferenceEnergy);
    }
    if er == 0.0 {
        return Ok(ERLE_CAP_DB);
    }
    Ok((10.0 * (ed / er).log10()).min(ERLE_CAP_DB))
}

/// ERLE over the whole signal.
pub fn erle_full(d: &AudioSignal, residual: &AudioSignal) -> Result<f64> {
    erle_selected(d, residual, &vec![true; d.len()])
}

/// ERLE over far-end single-talk frames.
pub fn erle(d: &AudioSignal, residual: &AudioSignal, labels: &[DtdLabel]) -> Result<f64> {
    let select: Vec<bool> = sample_labels(labels, d.len())
        .into_iter()
        .map(|l| l == DtdLabel::FarEnd)
        .collect();
    erle_selected(d, residual, &select)
}

/// ERLE over a trailing window of `seconds`.
pub fn erle_tail(d: &AudioSignal, residual: &AudioSignal, seconds: f64) -> Result<f64> {
    let n = ((seconds * d.sample_rate() as f64) as usize).min(d.len());
    let select: Vec<bool> = (0..d.len()).map(|i| i >= d.len() - n).collect();
    erle_selected(d, residual, &select)
}
