//! Two-headed forward pass: shared bottleneck trunk, a double-talk branch
//! whose embedding gates the trunk channels, and the mask branch.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::features::FeatureTensor;
use crate::nn::arch::Architecture;
use crate::nn::ops::{self, Activation, BottleneckParams};
use crate::nn::tensor::Tensor;
use crate::nn::weights::WeightBundle;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput {
    /// Per-bin suppression gains in [0, 1].
    pub mask: Vec<f32>,
    /// Posterior over (near-end single, far-end single, double talk).
    pub dtd: [f32; 3],
}

/// A validated weight bundle ready for inference.
#[derive(Debug, Clone)]
pub struct Model {
    weights: Arc<WeightBundle>,
}

impl Model {
    pub fn new(weights: Arc<WeightBundle>) -> Result<Self> {
        let arch = weights.architecture();
        let default = Architecture::default();
        if arch.input != default.input
            || arch.mask_bins != default.mask_bins
            || arch.dtd_classes != 3
        {
            return Err(Error::Shape {
                layer: "model".into(),
                reason: format!(
                    "runtime expects input {:?}, {} mask bins and 3 DTD classes",
                    default.input, default.mask_bins
                ),
            });
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &Arc<WeightBundle> {
        &self.weights
    }

    fn param(&self, name: &str) -> &Tensor {
        // Presence is guaranteed by WeightBundle validation.
        self.weights
            .get(name)
            .unwrap_or_else(|| panic!("validated bundle lacks `{name}`"))
    }

    fn wb(&self, layer: &str) -> (&Tensor, &[f32]) {
        (
            self.param(&format!("{layer}.weight")),
            self.param(&format!("{layer}.bias")).data(),
        )
    }

    pub fn forward(&self, features: &FeatureTensor) -> Result<ModelOutput> {
        let arch = self.weights.architecture();
        let named = |layer: &str| {
            let layer = layer.to_string();
            move |e: Error| match e {
                Error::Shape { reason, .. } => Error::Shape {
                    layer: layer.clone(),
                    reason,
                },
                other => other,
            }
        };

        let scale = self.param("input_norm.scale").data()[0];
        let offset = self.param("input_norm.offset").data()[0];
        let input = Tensor::new(
            arch.input.to_vec(),
            features.data.iter().map(|&v| v * scale + offset).collect(),
        )
        .map_err(named("input_norm"))?;
        check("input_norm", input.data())?;

        let (w, b) = self.wb("stem");
        let stride = arch.stem_stride;
        let mut x =
            ops::conv2d(&input, w, b, stride, arch.stem_kernel / 2).map_err(named("stem"))?;
        ops::activate_in_place(&mut x, Activation::Relu6)?;
        check("stem", x.data())?;

        for (i, block) in arch.blocks.iter().enumerate() {
            let name = Architecture::block_name(i);
            let (ew, eb) = self.wb(&format!("{name}.expand"));
            let (dw, db) = self.wb(&format!("{name}.depthwise"));
            let (pw, pb) = self.wb(&format!("{name}.project"));
            let params = BottleneckParams {
                expand_weight: ew,
                expand_bias: eb,
                depthwise_weight: dw,
                depthwise_bias: db,
                project_weight: pw,
                project_bias: pb,
            };
            x = ops::inverted_residual(&x, &params, block.stride, block.expand)
                .map_err(named(&name))?;
            check(&name, x.data())?;
        }
        let trunk = x;

        let pooled = ops::global_average_pool(&trunk).map_err(named("dtd.pool"))?;
        let (w, b) = self.wb("dtd.fc1");
        let mut embedding = ops::fully_connected(&pooled, w, b).map_err(named("dtd.fc1"))?;
        embedding.iter_mut().for_each(|v| *v = v.clamp(0.0, 6.0));
        check("dtd.fc1", &embedding)?;

        let (w, b) = self.wb("dtd.fc2");
        let mut logits =
            Tensor::vector(ops::fully_connected(&embedding, w, b).map_err(named("dtd.fc2"))?);
        ops::activate_in_place(&mut logits, Activation::Softmax)?;
        check("dtd.fc2", logits.data())?;
        let dtd: [f32; 3] = logits.data().try_into().expect("three DTD classes");

        let (w, b) = self.wb("gate");
        let mut gate =
            Tensor::vector(ops::fully_connected(&embedding, w, b).map_err(named("gate"))?);
        ops::activate_in_place(&mut gate, Activation::Sigmoid)?;
        let (c, h, wd) = trunk.chw().expect("rank-3 trunk");
        let mut gated = trunk.into_data();
        for (plane, &g) in gated.chunks_exact_mut(h * wd).zip(gate.data()).take(c) {
            plane.iter_mut().for_each(|v| *v *= g);
        }
        check("gate", &gated)?;

        let (w, b) = self.wb("mask.fc1");
        let mut hidden = ops::fully_connected(&gated, w, b).map_err(named("mask.fc1"))?;
        hidden.iter_mut().for_each(|v| *v = v.clamp(0.0, 6.0));
        check("mask.fc1", &hidden)?;

        let (w, b) = self.wb("mask.fc2");
        let mut mask =
            Tensor::vector(ops::fully_connected(&hidden, w, b).map_err(named("mask.fc2"))?);
        ops::activate_in_place(&mut mask, Activation::Sigmoid)?;
        check("mask.fc2", mask.data())?;
        let mask = mask
            .into_data()
            .into_iter()
            .map(|v| v.clamp(0.0, 1.0))
            .collect();

        Ok(ModelOutput { mask, dtd })
    }
}

fn check(layer: &str, data: &[f32]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(layer.to_string()))
    }
}

/// One-shot convenience wrapper around [`Model::forward`].
pub fn forward(features: &FeatureTensor, weights: &Arc<WeightBundle>) -> Result<ModelOutput> {
    Model::new(Arc::clone(weights))?.forward(features)
}
