//! Normative architecture of the suppression network.
//!
//! The default table:
//!
//! ```text
//! input 2x40x32 -> affine(scale, offset)
//! stem   conv 16, 3x3, stride 2, pad 1, relu6        -> 16x20x16
//! irb1   out 24, stride 2, expand 4                   -> 24x10x8
//! irb2   out 32, stride 2, expand 4                   -> 32x5x4
//! irb3   out 64, stride 1, expand 4                   -> 64x5x4
//! irb4   out 96, stride 1, expand 4                   -> 96x5x4
//! dtd    avgpool -> fc 96->32 relu6 (embedding) -> fc 32->3 softmax
//! gate   fc 32->96 sigmoid, scales trunk channels
//! mask   flatten 1920 -> fc 1920->256 relu6 -> fc 256->64 sigmoid
//! ```
//!
//! [`Architecture::layers`] expands this into a flat table that drives
//! weight validation, the file fingerprint and FLOP accounting.

use sha2::{Digest, Sha256};

use crate::nn::ops::conv_out_dim;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BottleneckSpec {
    pub out_channels: usize,
    pub stride: usize,
    pub expand: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub input: [usize; 3],
    pub stem_channels: usize,
    pub stem_kernel: usize,
    pub stem_stride: usize,
    pub blocks: Vec<BottleneckSpec>,
    pub dtd_embedding: usize,
    pub dtd_classes: usize,
    pub mask_hidden: usize,
    pub mask_bins: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        let block = |out_channels, stride| BottleneckSpec {
            out_channels,
            stride,
            expand: 4,
        };
        Self {
            input: [2, 40, 32],
            stem_channels: 16,
            stem_kernel: 3,
            stem_stride: 2,
            blocks: vec![block(24, 2), block(32, 2), block(64, 1), block(96, 1)],
            dtd_embedding: 32,
            dtd_classes: 3,
            mask_hidden: 256,
            mask_bins: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerOp {
    /// Elementwise `x * scale + offset` with scalar parameters.
    Affine,
    Conv {
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Depthwise {
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Relu6,
    Sigmoid,
    Softmax,
    ResidualAdd,
    GlobalAvgPool,
    Dense,
    /// Channelwise product of a `(C, H, W)` tensor with a `(C,)` gate.
    ChannelGate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerInfo {
    pub name: String,
    pub op: LayerOp,
    pub input: Vec<usize>,
    pub output: Vec<usize>,
    /// Parameter tensors owned by the layer, `(name, shape)`.
    pub params: Vec<(String, Vec<usize>)>,
}

impl Architecture {
    pub fn trunk_output(&self) -> [usize; 3] {
        let mut shape = self.stem_output();
        for b in &self.blocks {
            shape = [
                b.out_channels,
                conv_out_dim(shape[1], 3, b.stride, 1),
                conv_out_dim(shape[2], 3, b.stride, 1),
            ];
        }
        shape
    }

    pub fn stem_output(&self) -> [usize; 3] {
        let pad = self.stem_kernel / 2;
        [
            self.stem_channels,
            conv_out_dim(self.input[1], self.stem_kernel, self.stem_stride, pad),
            conv_out_dim(self.input[2], self.stem_kernel, self.stem_stride, pad),
        ]
    }

    /// Name of bottleneck `i` (0-based) in the weight file.
    pub fn block_name(i: usize) -> String {
        format!("irb{}", i + 1)
    }

    /// Flat layer table in execution order.
    pub fn layers(&self) -> Vec<LayerInfo> {
        let mut out = Vec::new();
        let wb = |name: &str, w: Vec<usize>, b: usize| {
            vec![
                (format!("{name}.weight"), w),
                (format!("{name}.bias"), vec![b]),
            ]
        };
        let act = |name: String, op: LayerOp, shape: &[usize]| LayerInfo {
            name,
            op,
            input: shape.to_vec(),
            output: shape.to_vec(),
            params: vec![],
        };

        let input = self.input.to_vec();
        out.push(LayerInfo {
            name: "input_norm".into(),
            op: LayerOp::Affine,
            input: input.clone(),
            output: input.clone(),
            params: vec![
                ("input_norm.scale".into(), vec![1]),
                ("input_norm.offset".into(), vec![1]),
            ],
        });

        let stem = self.stem_output().to_vec();
        let k = self.stem_kernel;
        out.push(LayerInfo {
            name: "stem".into(),
            op: LayerOp::Conv {
                kernel: k,
                stride: self.stem_stride,
                padding: k / 2,
            },
            input,
            output: stem.clone(),
            params: wb(
                "stem",
                vec![self.stem_channels, self.input[0], k, k],
                self.stem_channels,
            ),
        });
        out.push(act("stem.relu6".into(), LayerOp::Relu6, &stem));

        let mut shape = stem;
        for (i, b) in self.blocks.iter().enumerate() {
            let name = Self::block_name(i);
            let (c_in, h, w) = (shape[0], shape[1], shape[2]);
            let hidden = c_in * b.expand;
            let expanded = vec![hidden, h, w];
            out.push(LayerInfo {
                name: format!("{name}.expand"),
                op: LayerOp::Conv {
                    kernel: 1,
                    stride: 1,
                    padding: 0,
                },
                input: shape.clone(),
                output: expanded.clone(),
                params: wb(&format!("{name}.expand"), vec![hidden, c_in, 1, 1], hidden),
            });
            out.push(act(
                format!("{name}.expand.relu6"),
                LayerOp::Relu6,
                &expanded,
            ));
            let spatial = vec![
                hidden,
                conv_out_dim(h, 3, b.stride, 1),
                conv_out_dim(w, 3, b.stride, 1),
            ];
            out.push(LayerInfo {
                name: format!("{name}.depthwise"),
                op: LayerOp::Depthwise {
                    kernel: 3,
                    stride: b.stride,
                    padding: 1,
                },
                input: expanded,
                output: spatial.clone(),
                params: wb(&format!("{name}.depthwise"), vec![hidden, 1, 3, 3], hidden),
            });
            out.push(act(
                format!("{name}.depthwise.relu6"),
                LayerOp::Relu6,
                &spatial,
            ));
            let projected = vec![b.out_channels, spatial[1], spatial[2]];
            out.push(LayerInfo {
                name: format!("{name}.project"),
                op: LayerOp::Conv {
                    kernel: 1,
                    stride: 1,
                    padding: 0,
                },
                input: spatial,
                output: projected.clone(),
                params: wb(
                    &format!("{name}.project"),
                    vec![b.out_channels, hidden, 1, 1],
                    b.out_channels,
                ),
            });
            if b.stride == 1 && b.out_channels == c_in {
                out.push(act(
                    format!("{name}.residual"),
                    LayerOp::ResidualAdd,
                    &projected,
                ));
            }
            shape = projected;
        }

        let trunk = shape;
        let channels = trunk[0];
        let flat: usize = trunk.iter().product();
        let dense = |name: &str, n_in: usize, n_out: usize| LayerInfo {
            name: name.to_string(),
            op: LayerOp::Dense,
            input: vec![n_in],
            output: vec![n_out],
            params: wb(name, vec![n_out, n_in], n_out),
        };

        out.push(LayerInfo {
            name: "dtd.pool".into(),
            op: LayerOp::GlobalAvgPool,
            input: trunk.clone(),
            output: vec![channels],
            params: vec![],
        });
        out.push(dense("dtd.fc1", channels, self.dtd_embedding));
        out.push(act(
            "dtd.fc1.relu6".into(),
            LayerOp::Relu6,
            &[self.dtd_embedding],
        ));
        out.push(dense("dtd.fc2", self.dtd_embedding, self.dtd_classes));
        out.push(act(
            "dtd.softmax".into(),
            LayerOp::Softmax,
            &[self.dtd_classes],
        ));

        out.push(dense("gate", self.dtd_embedding, channels));
        out.push(act("gate.sigmoid".into(), LayerOp::Sigmoid, &[channels]));
        out.push(LayerInfo {
            name: "gate.apply".into(),
            op: LayerOp::ChannelGate,
            input: trunk.clone(),
            output: trunk,
            params: vec![],
        });

        out.push(dense("mask.fc1", flat, self.mask_hidden));
        out.push(act(
            "mask.fc1.relu6".into(),
            LayerOp::Relu6,
            &[self.mask_hidden],
        ));
        out.push(dense("mask.fc2", self.mask_hidden, self.mask_bins));
        out.push(act(
            "mask.sigmoid".into(),
            LayerOp::Sigmoid,
            &[self.mask_bins],
        ));
        out
    }

    /// Every parameter tensor in canonical order.
    pub fn tensor_specs(&self) -> Vec<(String, Vec<usize>)> {
        self.layers().into_iter().flat_map(|l| l.params).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensor_specs()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }

    /// SHA-256 over a canonical text rendering of the layer table.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        for layer in self.layers() {
            hasher.update(format!(
                "{}|{:?}|{:?}|{:?}|{:?}\n",
                layer.name, layer.op, layer.input, layer.output, layer.params
            ));
        }
        hasher.finalize().into()
    }
}
