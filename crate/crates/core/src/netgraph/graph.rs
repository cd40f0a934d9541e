//! Symbolic layer graph of the encoder/decoder.
//!
//! The contracting path is a ResNet-50 trunk (stem, max-pool and four
//! bottleneck stages). The expanding path has five steps; each upsamples the
//! previous map by two, concatenates one skip map and applies a 3×3 conv +
//! ReLU. The two deepest skip maps go through 1×1 reductions first, and the
//! full-resolution step concatenates the raw input image.

use serde::{Deserialize, Serialize};

use super::config::ArchConfig;
use crate::error::{Error, Result};

/// Total downsampling factor of the encoder.
pub const ENCODER_STRIDE: usize = 32;

/// `(bottleneck width, output channels, units, first-unit stride)` of the
/// four ResNet-50 stages.
pub const RESNET50_STAGES: [(usize, usize, usize, usize); 4] = [
    (64, 256, 3, 1),
    (128, 512, 4, 2),
    (256, 1024, 6, 2),
    (512, 2048, 3, 2),
];

pub const STEM_CHANNELS: usize = 64;

pub type LayerId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum LayerKind {
    Input,
    Conv,
    BottleneckBlock { width: usize, projection: bool },
    DownsampleBottleneck { width: usize },
    MaxPool,
    BilinearUpsample,
    Concat,
    Relu,
    FinalConv,
}

impl LayerKind {
    pub fn label(&self) -> &'static str {
        match self {
            LayerKind::Input => "input",
            LayerKind::Conv => "conv",
            LayerKind::BottleneckBlock { .. } => "bottleneck_block",
            LayerKind::DownsampleBottleneck { .. } => "downsample_bottleneck",
            LayerKind::MaxPool => "max_pool",
            LayerKind::BilinearUpsample => "bilinear_upsample",
            LayerKind::Concat => "concat",
            LayerKind::Relu => "relu",
            LayerKind::FinalConv => "final_conv",
        }
    }
}

/// Normalisation fused after a convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    None,
    /// Batch norm that always uses its stored statistics.
    FrozenBatchNorm,
    /// Batch renormalisation with clamped correction factors.
    BatchRenorm,
}

/// Which part of the network a layer belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Input,
    Encoder,
    Reduction,
    Decoder,
    Classifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub kernel: (usize, usize),
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub trainable: bool,
    pub pretrained: bool,
    pub norm: Norm,
    pub bias: bool,
    pub role: Role,
    pub inputs: Vec<LayerId>,
    /// Spatial downsampling factor of this layer's output w.r.t. the input image.
    pub scale: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Kernel,
    Bias,
    Gamma,
    Beta,
    MovingMean,
    MovingVariance,
}

impl ParamKind {
    /// Moving statistics are state, not learnable parameters.
    pub fn is_learnable(&self) -> bool {
        !matches!(self, ParamKind::MovingMean | ParamKind::MovingVariance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: ParamKind,
    /// Fan-in / fan-out used by Xavier initialisation (kernels only).
    pub fans: (usize, usize),
}

impl ParamSpec {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

fn conv_params(out: &mut Vec<ParamSpec>, prefix: &str, k: usize, c_in: usize, c_out: usize, bias: bool) {
    out.push(ParamSpec {
        name: format!("{prefix}/weights"),
        shape: vec![k, k, c_in, c_out],
        kind: ParamKind::Kernel,
        fans: (k * k * c_in, k * k * c_out),
    });
    if bias {
        out.push(ParamSpec {
            name: format!("{prefix}/biases"),
            shape: vec![c_out],
            kind: ParamKind::Bias,
            fans: (0, 0),
        });
    }
}

fn norm_params(out: &mut Vec<ParamSpec>, prefix: &str, channels: usize) {
    for (suffix, kind) in [
        ("gamma", ParamKind::Gamma),
        ("beta", ParamKind::Beta),
        ("moving_mean", ParamKind::MovingMean),
        ("moving_variance", ParamKind::MovingVariance),
    ] {
        out.push(ParamSpec {
            name: format!("{prefix}/{suffix}"),
            shape: vec![channels],
            kind,
            fans: (0, 0),
        });
    }
}

impl LayerSpec {
    /// Every tensor this layer owns, including normalisation statistics.
    pub fn params(&self) -> Vec<ParamSpec> {
        let mut out = Vec::new();
        match self.kind {
            LayerKind::Conv | LayerKind::FinalConv => {
                conv_params(&mut out, &self.name, self.kernel.0, self.in_channels, self.out_channels, self.bias);
                match self.norm {
                    Norm::None => {}
                    Norm::FrozenBatchNorm => norm_params(&mut out, &format!("{}/bn", self.name), self.out_channels),
                    Norm::BatchRenorm => norm_params(&mut out, &format!("{}/renorm", self.name), self.out_channels),
                }
            }
            LayerKind::BottleneckBlock { width, .. } | LayerKind::DownsampleBottleneck { width } => {
                let n = &self.name;
                conv_params(&mut out, &format!("{n}/conv1"), 1, self.in_channels, width, false);
                norm_params(&mut out, &format!("{n}/conv1/bn"), width);
                conv_params(&mut out, &format!("{n}/conv2"), 3, width, width, false);
                norm_params(&mut out, &format!("{n}/conv2/bn"), width);
                conv_params(&mut out, &format!("{n}/conv3"), 1, width, self.out_channels, false);
                norm_params(&mut out, &format!("{n}/conv3/bn"), self.out_channels);
                if self.has_projection() {
                    conv_params(&mut out, &format!("{n}/shortcut"), 1, self.in_channels, self.out_channels, false);
                    norm_params(&mut out, &format!("{n}/shortcut/bn"), self.out_channels);
                }
            }
            _ => {}
        }
        out
    }

    pub fn has_projection(&self) -> bool {
        match self.kind {
            LayerKind::BottleneckBlock { projection, .. } => projection,
            LayerKind::DownsampleBottleneck { .. } => true,
            _ => false,
        }
    }

    /// Number of learnable scalars (weights, biases, norm scale/offset).
    pub fn param_count(&self) -> usize {
        self.params()
            .iter()
            .filter(|p| p.kind.is_learnable())
            .map(ParamSpec::numel)
            .sum()
    }
}

/// `(source layer, destination decoder step)`; steps are numbered 1..=5
/// from the deepest.
pub type SkipLink = (LayerId, usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkGraph {
    pub config: ArchConfig,
    pub layers: Vec<LayerSpec>,
    pub skip_links: Vec<SkipLink>,
    /// Layers whose outputs are the five encoder feature maps, shallowest first.
    pub encoder_outputs: Vec<LayerId>,
    /// The convolution layer of each decoder step, deepest first.
    pub decoder_convs: Vec<LayerId>,
}

struct Builder {
    layers: Vec<LayerSpec>,
}

impl Builder {
    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        name: impl Into<String>,
        kind: LayerKind,
        kernel: usize,
        out_channels: usize,
        stride: usize,
        norm: Norm,
        bias: bool,
        role: Role,
        inputs: Vec<LayerId>,
    ) -> LayerId {
        let in_channels = inputs.iter().map(|&i| self.layers[i].out_channels).sum();
        let in_scale = inputs.first().map(|&i| self.layers[i].scale).unwrap_or(1);
        let scale = match kind {
            LayerKind::BilinearUpsample => in_scale / 2,
            _ => in_scale * stride,
        };
        let trainable = role != Role::Input;
        self.layers.push(LayerSpec {
            name: name.into(),
            kind,
            kernel: (kernel, kernel),
            in_channels,
            out_channels,
            stride,
            trainable,
            pretrained: role == Role::Encoder,
            norm,
            bias,
            role,
            inputs,
            scale,
        });
        self.layers.len() - 1
    }

    fn channels(&self, id: LayerId) -> usize {
        self.layers[id].out_channels
    }
}

/// Builds the layer graph for `config`.
pub fn build_graph(config: &ArchConfig) -> Result<NetworkGraph> {
    config.validate()?;
    let mut b = Builder { layers: Vec::new() };
    let input = b.push("input", LayerKind::Input, 0, config.input_channels, 1, Norm::None, false, Role::Input, vec![]);

    let stem = b.push("encoder/conv1", LayerKind::Conv, 7, STEM_CHANNELS, 2, Norm::FrozenBatchNorm, false, Role::Encoder, vec![input]);
    let stem_relu = b.push("encoder/conv1/relu", LayerKind::Relu, 0, STEM_CHANNELS, 1, Norm::None, false, Role::Encoder, vec![stem]);
    let mut prev = b.push("encoder/pool1", LayerKind::MaxPool, 3, STEM_CHANNELS, 2, Norm::None, false, Role::Encoder, vec![stem_relu]);

    let mut encoder_outputs = vec![stem_relu];
    for (s, &(width, out, units, stride)) in RESNET50_STAGES.iter().enumerate() {
        for u in 0..units {
            let unit_stride = if u == 0 { stride } else { 1 };
            let in_c = b.channels(prev);
            let kind = if unit_stride > 1 {
                LayerKind::DownsampleBottleneck { width }
            } else {
                LayerKind::BottleneckBlock { width, projection: in_c != out }
            };
            let name = format!("encoder/block{}/unit{}", s + 1, u + 1);
            prev = b.push(name, kind, 3, out, unit_stride, Norm::FrozenBatchNorm, false, Role::Encoder, vec![prev]);
        }
        encoder_outputs.push(prev);
    }

    let r = config.reduction_channels;
    let deepest = encoder_outputs[4];
    let second = encoder_outputs[3];
    let red_deep = b.push("reduction/block4", LayerKind::Conv, 1, r, 1, Norm::None, true, Role::Reduction, vec![deepest]);
    let red_second = b.push("reduction/block3", LayerKind::Conv, 1, r, 1, Norm::None, true, Role::Reduction, vec![second]);

    let skips = [red_second, encoder_outputs[2], encoder_outputs[1], encoder_outputs[0], input];
    let mut skip_links = vec![(second, 1)];
    skip_links.extend(skips[1..].iter().enumerate().map(|(k, &src)| (src, k + 2)));

    let mut decoder_convs = Vec::with_capacity(5);
    let mut prev = red_deep;
    for (k, (&skip, &width)) in skips.iter().zip(&config.decoder_channels).enumerate() {
        let step = format!("decoder/step{}", k + 1);
        let c = b.channels(prev);
        let up = b.push(format!("{step}/upsample"), LayerKind::BilinearUpsample, 0, c, 1, Norm::None, false, Role::Decoder, vec![prev]);
        let cat_c = c + b.channels(skip);
        let cat = b.push(format!("{step}/concat"), LayerKind::Concat, 0, cat_c, 1, Norm::None, false, Role::Decoder, vec![up, skip]);
        let conv = b.push(format!("{step}/conv"), LayerKind::Conv, 3, width, 1, Norm::BatchRenorm, true, Role::Decoder, vec![cat]);
        decoder_convs.push(conv);
        prev = b.push(format!("{step}/relu"), LayerKind::Relu, 0, width, 1, Norm::None, false, Role::Decoder, vec![conv]);
    }
    b.push("classifier", LayerKind::FinalConv, 1, config.n_classes, 1, Norm::None, true, Role::Classifier, vec![prev]);

    let graph = NetworkGraph {
        config: config.clone(),
        layers: b.layers,
        skip_links,
        encoder_outputs,
        decoder_convs,
    };
    graph.validate()?;
    Ok(graph)
}

impl NetworkGraph {
    pub fn n_classes(&self) -> usize {
        self.config.n_classes
    }

    pub fn output_layer(&self) -> LayerId {
        self.layers.len() - 1
    }

    pub fn layer(&self, name: &str) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn params(&self) -> Vec<ParamSpec> {
        self.layers.iter().flat_map(LayerSpec::params).collect()
    }

    /// Marks every encoder layer as (non-)trainable.
    pub fn set_encoder_trainable(&mut self, trainable: bool) {
        for l in &mut self.layers {
            if l.role == Role::Encoder {
                l.trainable = trainable;
            }
        }
    }

    /// Structural checks on a built graph.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArch(msg));
        if self.encoder_outputs.len() != 5 {
            return bad(format!("expected 5 encoder stages, got {}", self.encoder_outputs.len()));
        }
        for (i, &id) in self.encoder_outputs.iter().enumerate() {
            let expected = 2usize << i;
            if self.layers[id].scale != expected {
                return bad(format!(
                    "encoder stage {} is at 1/{} resolution, expected 1/{}",
                    i + 1,
                    self.layers[id].scale,
                    expected
                ));
            }
        }
        for (id, layer) in self.layers.iter().enumerate() {
            if layer.inputs.iter().any(|&i| i >= id) {
                return bad(format!("layer {} is not topologically ordered", layer.name));
            }
            if layer.kind == LayerKind::Concat && layer.inputs.len() != 2 {
                return bad(format!("{} must join one upsampled and one skip map", layer.name));
            }
            if layer.kind == LayerKind::Concat {
                let up = &self.layers[layer.inputs[0]];
                if up.kind != LayerKind::BilinearUpsample {
                    return bad(format!("{} must take an upsampled map first", layer.name));
                }
            }
        }
        for &conv in &self.decoder_convs {
            let next = self.layers.iter().find(|l| l.inputs.first() == Some(&conv));
            if !matches!(next, Some(l) if l.kind == LayerKind::Relu) {
                return bad(format!("{} must be followed by a ReLU", self.layers[conv].name));
            }
        }
        let last = &self.layers[self.output_layer()];
        if last.kind != LayerKind::FinalConv || last.kernel != (1, 1) || last.out_channels != self.config.n_classes {
            return bad("the graph must end in a 1x1 conv with n_classes outputs".into());
        }
        if last.scale != 1 {
            return bad("the output must be at full input resolution".into());
        }
        Ok(())
    }

    /// Output `(h, w, c)` of every layer for an input of `h × w`.
    pub fn layer_shapes(&self, h: usize, w: usize) -> Vec<(usize, usize, usize)> {
        self.layers
            .iter()
            .map(|l| (h / l.scale, w / l.scale, l.out_channels))
            .collect()
    }

    /// Symbolic output shape `(batch, h, w, n_classes)` for an NHWC input shape.
    pub fn forward_shape(&self, input: (usize, usize, usize, usize)) -> Result<(usize, usize, usize, usize)> {
        let (batch, h, w, c) = input;
        if c != self.config.input_channels {
            return Err(Error::Shape(format!(
                "input has {c} channels, the network expects {}",
                self.config.input_channels
            )));
        }
        for (what, v) in [("height", h), ("width", w)] {
            if v == 0 || v % ENCODER_STRIDE != 0 {
                return Err(Error::Shape(format!(
                    "input {what} {v} is not a positive multiple of {ENCODER_STRIDE} \
                     (the encoder downsamples by {ENCODER_STRIDE}); pad to {}",
                    v.div_ceil(ENCODER_STRIDE).max(1) * ENCODER_STRIDE
                )));
            }
        }
        let shapes = self.layer_shapes(h, w);
        for (id, layer) in self.layers.iter().enumerate() {
            if layer.kind == LayerKind::BilinearUpsample {
                let src = shapes[layer.inputs[0]];
                let dst = shapes[id];
                if dst.0 != 2 * src.0 || dst.1 != 2 * src.1 {
                    return Err(Error::Shape(format!("{} does not double its input", layer.name)));
                }
            }
            if layer.kind == LayerKind::Concat {
                let (a, s) = (shapes[layer.inputs[0]], shapes[layer.inputs[1]]);
                if (a.0, a.1) != (s.0, s.1) {
                    return Err(Error::Shape(format!(
                        "{}: upsampled map {:?} does not match skip map {:?}",
                        layer.name, a, s
                    )));
                }
            }
        }
        let out = shapes[self.output_layer()];
        Ok((batch, out.0, out.1, out.2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count(g: &NetworkGraph, pred: impl Fn(&LayerSpec) -> bool) -> usize {
        g.layers.iter().filter(|l| pred(l)).count()
    }

    #[test]
    fn default_graph_layout() {
        let g = build_graph(&ArchConfig::default()).unwrap();
        assert_eq!(g.encoder_outputs.len(), 5);
        assert_eq!(count(&g, |l| l.role == Role::Reduction), 2);
        assert_eq!(g.decoder_convs.len(), 5);
        assert_eq!(count(&g, |l| l.kind == LayerKind::FinalConv), 1);
        assert_eq!(count(&g, |l| matches!(l.kind, LayerKind::BottleneckBlock { .. } | LayerKind::DownsampleBottleneck { .. })), 16);
        assert_eq!(count(&g, |l| matches!(l.kind, LayerKind::DownsampleBottleneck { .. })), 3);
        let channels: Vec<usize> = g.encoder_outputs.iter().map(|&i| g.layers[i].out_channels).collect();
        assert_eq!(channels, vec![64, 256, 512, 1024, 2048]);
        let widths: Vec<usize> = g.decoder_convs.iter().map(|&i| g.layers[i].out_channels).collect();
        assert_eq!(widths, vec![512, 256, 128, 64, 32]);
        // The full-resolution step sees 64 upsampled + 3 image channels.
        assert_eq!(g.layers[g.decoder_convs[4]].in_channels, 67);
    }

    #[test]
    fn final_conv_matches_classes() {
        let g = build_graph(&ArchConfig::with_classes(4)).unwrap();
        let last = &g.layers[g.output_layer()];
        assert_eq!(last.out_channels, 4);
        assert_eq!(last.kernel, (1, 1));
    }

    #[test]
    fn forward_shape_contract() {
        let g = build_graph(&ArchConfig::default()).unwrap();
        assert_eq!(g.forward_shape((1, 320, 320, 3)).unwrap(), (1, 320, 320, 2));
        assert_eq!(g.forward_shape((4, 608, 416, 3)).unwrap(), (4, 608, 416, 2));
        let err = g.forward_shape((1, 300, 300, 3)).unwrap_err().to_string();
        assert!(err.contains("32"), "{err}");
        assert!(g.forward_shape((1, 320, 320, 1)).is_err());
    }

    #[test]
    fn skip_links_cover_every_step() {
        let g = build_graph(&ArchConfig::default()).unwrap();
        for step in 1..=5 {
            assert!(g.skip_links.iter().any(|&(_, s)| s == step));
        }
        assert_eq!(g.skip_links.last().unwrap().0, 0, "raw input feeds the last step");
    }
}
