//! Analytic operation count of the network.

use serde::Serialize;

use crate::nn::arch::{Architecture, LayerOp};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerFlops {
    pub name: String,
    pub flops: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlopReport {
    pub layers: Vec<LayerFlops>,
    pub total: u64,
}

impl FlopReport {
    pub fn mflops(&self) -> f64 {
        self.total as f64 / 1e6
    }
}

/// Convolutions count `2 C_out C_in k^2 H_out W_out` (depthwise
/// `2 C k^2 H_out W_out`), dense layers `2 in out`, the input affine two
/// ops per element, and every other elementwise op one.
pub fn count_flops(arch: &Architecture) -> FlopReport {
    let layers: Vec<LayerFlops> = arch
        .layers()
        .into_iter()
        .map(|l| {
            let out: u64 = l.output.iter().product::<usize>() as u64;
            let inp: u64 = l.input.iter().product::<usize>() as u64;
            let flops = match l.op {
                LayerOp::Conv { kernel, .. } => {
                    2 * l.input[0] as u64 * (kernel * kernel) as u64 * out
                }
                LayerOp::Depthwise { kernel, .. } => 2 * (kernel * kernel) as u64 * out,
                LayerOp::Dense => 2 * inp * out,
                LayerOp::Affine => 2 * out,
                LayerOp::GlobalAvgPool => inp,
                LayerOp::Relu6
                | LayerOp::Sigmoid
                | LayerOp::Softmax
                | LayerOp::ResidualAdd
                | LayerOp::ChannelGate => out,
            };
            LayerFlops {
                name: l.name,
                flops,
            }
        })
        .collect();
    let total = layers.iter().map(|l| l.flops).sum();
    FlopReport { layers, total }
}
