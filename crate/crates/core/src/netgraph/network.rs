//! Executes a [`NetworkGraph`] forwards and backwards.
//!
//! Each graph layer is lowered into primitive nodes (convolution,
//! normalisation, ReLU, pooling, residual add, upsampling, concatenation)
//! which are evaluated in topological order. Training-mode forward passes
//! record a [`Tape`] that `backward` consumes.

use std::collections::BTreeMap;

use super::graph::{LayerKind, NetworkGraph, Norm, ENCODER_STRIDE};
use super::ops::{self, RenormCache, RenormSettings};
use super::weights::WeightStore;
use super::OutputMode;
use crate::backend::{Backend, CpuBackend};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
enum Prim {
    Input,
    Conv {
        weight: String,
        bias: Option<String>,
        stride: usize,
    },
    FrozenBn {
        prefix: String,
    },
    Renorm {
        prefix: String,
    },
    Relu,
    MaxPool,
    Add,
    Upsample,
    Concat,
}

#[derive(Debug, Clone)]
struct Node {
    prim: Prim,
    inputs: Vec<usize>,
    trainable: bool,
}

enum Aux {
    None,
    ArgMax(Vec<u32>, Vec<usize>),
    Renorm(RenormCache),
}

/// Moving-statistics update produced by one batch renormalisation node.
#[derive(Debug, Clone)]
pub struct StatUpdate {
    pub prefix: String,
    pub batch_mean: Vec<f32>,
    pub batch_var: Vec<f32>,
}

/// Activations recorded by a training-mode forward pass.
pub struct Tape {
    values: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
    aux: Vec<Aux>,
    requires_grad: Vec<bool>,
    /// `(top, bottom, left, right)` zero padding added to reach a multiple of 32.
    padding: (usize, usize, usize, usize),
    pub stat_updates: Vec<StatUpdate>,
}

impl Tape {
    /// Folds the batch statistics into the moving averages.
    pub fn apply_stat_updates(&self, weights: &mut WeightStore, momentum: f32) -> Result<()> {
        for u in &self.stat_updates {
            let mean = weights.get_mut(&format!("{}/moving_mean", u.prefix))?;
            for (m, b) in mean.data_mut().iter_mut().zip(&u.batch_mean) {
                *m = momentum * *m + (1.0 - momentum) * b;
            }
            let var = weights.get_mut(&format!("{}/moving_variance", u.prefix))?;
            for (v, b) in var.data_mut().iter_mut().zip(&u.batch_var) {
                *v = momentum * *v + (1.0 - momentum) * b;
            }
        }
        Ok(())
    }
}

/// Gradients of the learnable tensors of trainable layers.
pub type Gradients = BTreeMap<String, Tensor>;

#[derive(Clone, Copy)]
enum Mode<'a> {
    Eval,
    Train(&'a RenormSettings),
}

pub struct Network<B: Backend = CpuBackend> {
    graph: NetworkGraph,
    nodes: Vec<Node>,
    backend: B,
}

impl Network<CpuBackend> {
    pub fn new(graph: NetworkGraph) -> Self {
        Self::with_backend(graph, CpuBackend::default())
    }
}

fn push(nodes: &mut Vec<Node>, prim: Prim, inputs: Vec<usize>, trainable: bool) -> usize {
    nodes.push(Node { prim, inputs, trainable });
    nodes.len() - 1
}

fn push_conv(nodes: &mut Vec<Node>, prefix: &str, input: usize, stride: usize, bias: bool, trainable: bool) -> usize {
    let prim = Prim::Conv {
        weight: format!("{prefix}/weights"),
        bias: bias.then(|| format!("{prefix}/biases")),
        stride,
    };
    push(nodes, prim, vec![input], trainable)
}

fn lower(graph: &NetworkGraph) -> Vec<Node> {
    let mut nodes: Vec<Node> = Vec::new();
    let mut layer_out = Vec::with_capacity(graph.layers.len());
    for layer in &graph.layers {
        let ins: Vec<usize> = layer.inputs.iter().map(|&i| layer_out[i]).collect();
        let t = layer.trainable;
        let n = &layer.name;
        let out = match layer.kind {
            LayerKind::Input => push(&mut nodes, Prim::Input, vec![], false),
            LayerKind::Conv | LayerKind::FinalConv => {
                let c = push_conv(&mut nodes, n, ins[0], layer.stride, layer.bias, t);
                match layer.norm {
                    Norm::None => c,
                    Norm::FrozenBatchNorm => push(&mut nodes, Prim::FrozenBn { prefix: format!("{n}/bn") }, vec![c], t),
                    Norm::BatchRenorm => push(&mut nodes, Prim::Renorm { prefix: format!("{n}/renorm") }, vec![c], t),
                }
            }
            LayerKind::BottleneckBlock { .. } | LayerKind::DownsampleBottleneck { .. } => {
                let mut x = ins[0];
                for (i, stride) in [(1, 1), (2, layer.stride), (3, 1)] {
                    let prefix = format!("{n}/conv{i}");
                    x = push_conv(&mut nodes, &prefix, x, stride, false, t);
                    x = push(&mut nodes, Prim::FrozenBn { prefix: format!("{prefix}/bn") }, vec![x], t);
                    if i < 3 {
                        x = push(&mut nodes, Prim::Relu, vec![x], false);
                    }
                }
                let shortcut = if layer.has_projection() {
                    let prefix = format!("{n}/shortcut");
                    let s = push_conv(&mut nodes, &prefix, ins[0], layer.stride, false, t);
                    push(&mut nodes, Prim::FrozenBn { prefix: format!("{prefix}/bn") }, vec![s], t)
                } else {
                    ins[0]
                };
                let sum = push(&mut nodes, Prim::Add, vec![x, shortcut], false);
                push(&mut nodes, Prim::Relu, vec![sum], false)
            }
            LayerKind::MaxPool => push(&mut nodes, Prim::MaxPool, ins, false),
            LayerKind::BilinearUpsample => push(&mut nodes, Prim::Upsample, ins, false),
            LayerKind::Concat => push(&mut nodes, Prim::Concat, ins, false),
            LayerKind::Relu => push(&mut nodes, Prim::Relu, ins, false),
        };
        layer_out.push(out);
    }
    nodes
}

fn slice<'a>(w: &'a WeightStore, name: &str) -> Result<&'a [f32]> {
    Ok(w.get(name)?.data())
}

impl<B: Backend> Network<B> {
    pub fn with_backend(graph: NetworkGraph, backend: B) -> Self {
        let nodes = lower(&graph);
        Network { graph, nodes, backend }
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    fn check_input(&self, weights: &WeightStore, input: &Tensor) -> Result<()> {
        if input.shape().len() != 4 {
            return Err(Error::Shape(format!("expected an NHWC batch, got {:?}", input.shape())));
        }
        let (_, h, w, c) = input.nhwc();
        if c != self.graph.config.input_channels || h == 0 || w == 0 {
            return Err(Error::Shape(format!(
                "batch {:?} does not match {} input channels",
                input.shape(),
                self.graph.config.input_channels
            )));
        }
        weights.check_compatible(&self.graph)
    }

    fn pad_amounts(h: usize, w: usize) -> (usize, usize, usize, usize) {
        let ph = h.next_multiple_of(ENCODER_STRIDE) - h;
        let pw = w.next_multiple_of(ENCODER_STRIDE) - w;
        (ph / 2, ph - ph / 2, pw / 2, pw - pw / 2)
    }

    /// Raw class scores for a normalised NHWC batch.
    ///
    /// Inputs whose sides are not multiples of 32 are zero-padded
    /// symmetrically and the logits cropped back to the input size.
    pub fn logits(&self, weights: &WeightStore, input: &Tensor) -> Result<Tensor> {
        self.check_input(weights, input)?;
        let (_, h, w, _) = input.nhwc();
        let pad = Self::pad_amounts(h, w);
        let padded = input.pad_spatial(pad.0, pad.1, pad.2, pad.3);
        let tape = self.run(weights, padded, Mode::Eval)?;
        let out = tape.values.last().cloned().flatten().expect("output kept");
        Ok(out.crop_spatial(pad.0, pad.2, h, w))
    }

    /// Per-pixel class probabilities (softmax or sigmoid per the graph config).
    pub fn forward(&self, weights: &WeightStore, input: &Tensor) -> Result<Tensor> {
        let logits = self.logits(weights, input)?;
        Ok(match self.graph.config.output {
            OutputMode::Softmax => ops::softmax_channels(&logits),
            OutputMode::Sigmoid => ops::sigmoid(&logits),
        })
    }

    /// Training-mode forward pass returning logits and the tape for `backward`.
    pub fn forward_train(
        &self,
        weights: &WeightStore,
        input: &Tensor,
        renorm: &RenormSettings,
    ) -> Result<(Tensor, Tape)> {
        self.check_input(weights, input)?;
        let (_, h, w, _) = input.nhwc();
        let pad = Self::pad_amounts(h, w);
        let padded = input.pad_spatial(pad.0, pad.1, pad.2, pad.3);
        let mut tape = self.run(weights, padded, Mode::Train(renorm))?;
        tape.padding = pad;
        let out = tape.values.last().cloned().flatten().expect("output kept");
        Ok((out.crop_spatial(pad.0, pad.2, h, w), tape))
    }

    fn requires_grad(&self) -> Vec<bool> {
        let mut rg = vec![false; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            rg[i] = node.trainable || node.inputs.iter().any(|&j| rg[j]);
        }
        rg
    }

    fn run(&self, weights: &WeightStore, input: Tensor, mode: Mode) -> Result<Tape> {
        let n = self.nodes.len();
        let training = matches!(mode, Mode::Train(_));
        let requires_grad = if training { self.requires_grad() } else { vec![false; n] };

        // A value must outlive the forward pass if a node that backpropagates
        // reads it: convolutions and batch norms read their input, ReLUs
        // their output.
        let mut keep = vec![false; n];
        keep[n - 1] = true;
        if training {
            for (i, node) in self.nodes.iter().enumerate() {
                if !requires_grad[i] {
                    continue;
                }
                match node.prim {
                    Prim::Conv { .. } | Prim::FrozenBn { .. } => keep[node.inputs[0]] = true,
                    Prim::Relu => keep[i] = true,
                    _ => {}
                }
            }
        }
        let mut consumers = vec![0usize; n];
        for node in &self.nodes {
            for &j in &node.inputs {
                consumers[j] += 1;
            }
        }

        let mut tape = Tape {
            values: (0..n).map(|_| None).collect(),
            shapes: vec![Vec::new(); n],
            aux: (0..n).map(|_| Aux::None).collect(),
            requires_grad,
            padding: (0, 0, 0, 0),
            stat_updates: Vec::new(),
        };
        let mut input = Some(input);

        for (i, node) in self.nodes.iter().enumerate() {
            let arg = |k: usize| -> &Tensor { tape.values[node.inputs[k]].as_ref().expect("input alive") };
            let out = match &node.prim {
                Prim::Input => input.take().expect("single input node"),
                Prim::Conv { weight, bias, stride } => {
                    let kernel = weights.get(weight)?;
                    let b = bias.as_ref().map(|b| slice(weights, b)).transpose()?;
                    self.backend.conv2d(arg(0), kernel, b, *stride)
                }
                Prim::FrozenBn { prefix } => ops::frozen_batch_norm(
                    arg(0),
                    slice(weights, &format!("{prefix}/gamma"))?,
                    slice(weights, &format!("{prefix}/beta"))?,
                    slice(weights, &format!("{prefix}/moving_mean"))?,
                    slice(weights, &format!("{prefix}/moving_variance"))?,
                ),
                Prim::Renorm { prefix } => {
                    let gamma = slice(weights, &format!("{prefix}/gamma"))?;
                    let beta = slice(weights, &format!("{prefix}/beta"))?;
                    let mean = slice(weights, &format!("{prefix}/moving_mean"))?;
                    let var = slice(weights, &format!("{prefix}/moving_variance"))?;
                    match mode {
                        Mode::Eval => ops::batch_renorm_eval(arg(0), gamma, beta, mean, var),
                        Mode::Train(settings) => {
                            let (y, cache) = ops::batch_renorm_train(arg(0), gamma, beta, mean, var, settings);
                            tape.stat_updates.push(StatUpdate {
                                prefix: prefix.clone(),
                                batch_mean: cache.batch_mean.clone(),
                                batch_var: cache.batch_var.clone(),
                            });
                            if tape.requires_grad[i] {
                                tape.aux[i] = Aux::Renorm(cache);
                            }
                            y
                        }
                    }
                }
                Prim::Relu => ops::relu(arg(0)),
                Prim::MaxPool => {
                    let (y, arg_max) = ops::max_pool_3x3_s2(arg(0));
                    if tape.requires_grad[i] {
                        tape.aux[i] = Aux::ArgMax(arg_max, arg(0).shape().to_vec());
                    }
                    y
                }
                Prim::Add => {
                    let mut y = arg(0).clone();
                    y.add_assign(arg(1));
                    y
                }
                Prim::Upsample => ops::upsample_bilinear_2x(arg(0)),
                Prim::Concat => Tensor::concat_channels(&[arg(0), arg(1)])?,
            };
            tape.shapes[i] = out.shape().to_vec();
            tape.values[i] = Some(out);
            for &j in &node.inputs {
                consumers[j] -= 1;
                if consumers[j] == 0 && !keep[j] {
                    tape.values[j] = None;
                }
            }
        }
        Ok(tape)
    }

    /// Backpropagates `dlogits` (shaped like the cropped logits) through the
    /// tape and returns gradients for every trainable tensor.
    pub fn backward(&self, weights: &WeightStore, tape: &Tape, dlogits: &Tensor) -> Result<Gradients> {
        let n = self.nodes.len();
        let (pt, pb, pl, pr) = tape.padding;
        let mut grads: Vec<Option<Tensor>> = (0..n).map(|_| None).collect();
        grads[n - 1] = Some(dlogits.pad_spatial(pt, pb, pl, pr));
        let mut params = Gradients::new();

        fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
            match slot {
                Some(t) => t.add_assign(&g),
                None => *slot = Some(g),
            }
        }

        for i in (0..n).rev() {
            if !tape.requires_grad[i] {
                continue;
            }
            let Some(dy) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let wants = |k: usize| tape.requires_grad[node.inputs[k]];
            let value = |j: usize| -> Result<&Tensor> {
                tape.values[j]
                    .as_ref()
                    .ok_or_else(|| Error::Train(format!("activation {j} was not recorded")))
            };
            match &node.prim {
                Prim::Input => {}
                Prim::Conv { weight, bias, stride } => {
                    let x = value(node.inputs[0])?;
                    let g = self.backend.conv2d_backward(x, weights.get(weight)?, *stride, &dy, wants(0));
                    if node.trainable {
                        params.insert(weight.clone(), g.kernel);
                        if let Some(b) = bias {
                            params.insert(b.clone(), Tensor::from_vec(&[g.bias.len()], g.bias)?);
                        }
                    }
                    if let Some(dx) = g.input {
                        accumulate(&mut grads[node.inputs[0]], dx);
                    }
                }
                Prim::FrozenBn { prefix } => {
                    let x = value(node.inputs[0])?;
                    let gamma = slice(weights, &format!("{prefix}/gamma"))?;
                    let (dx, dg, db) = ops::frozen_batch_norm_backward(
                        x,
                        &dy,
                        gamma,
                        slice(weights, &format!("{prefix}/moving_mean"))?,
                        slice(weights, &format!("{prefix}/moving_variance"))?,
                        wants(0),
                    );
                    if node.trainable {
                        params.insert(format!("{prefix}/gamma"), Tensor::from_vec(&[dg.len()], dg)?);
                        params.insert(format!("{prefix}/beta"), Tensor::from_vec(&[db.len()], db)?);
                    }
                    if let Some(dx) = dx {
                        accumulate(&mut grads[node.inputs[0]], dx);
                    }
                }
                Prim::Renorm { prefix } => {
                    let Aux::Renorm(cache) = &tape.aux[i] else {
                        return Err(Error::Train(format!("{prefix}: no renorm cache recorded")));
                    };
                    let gamma = slice(weights, &format!("{prefix}/gamma"))?;
                    let (dx, dg, db) = ops::batch_renorm_backward(cache, gamma, &dy, wants(0));
                    if node.trainable {
                        params.insert(format!("{prefix}/gamma"), Tensor::from_vec(&[dg.len()], dg)?);
                        params.insert(format!("{prefix}/beta"), Tensor::from_vec(&[db.len()], db)?);
                    }
                    if let Some(dx) = dx {
                        accumulate(&mut grads[node.inputs[0]], dx);
                    }
                }
                Prim::Relu => {
                    let y = value(i)?;
                    accumulate(&mut grads[node.inputs[0]], ops::relu_backward(y, &dy));
                }
                Prim::MaxPool => {
                    let Aux::ArgMax(arg, shape) = &tape.aux[i] else {
                        return Err(Error::Train("max pool indices were not recorded".into()));
                    };
                    accumulate(&mut grads[node.inputs[0]], ops::max_pool_backward(shape, arg, &dy));
                }
                Prim::Add => {
                    if wants(1) {
                        accumulate(&mut grads[node.inputs[1]], dy.clone());
                    }
                    if wants(0) {
                        accumulate(&mut grads[node.inputs[0]], dy);
                    }
                }
                Prim::Upsample => {
                    let shape = &tape.shapes[node.inputs[0]];
                    accumulate(&mut grads[node.inputs[0]], ops::upsample_bilinear_2x_backward(shape, &dy));
                }
                Prim::Concat => {
                    let widths = [tape.shapes[node.inputs[0]][3], tape.shapes[node.inputs[1]][3]];
                    for (k, part) in dy.split_channels(&widths).into_iter().enumerate() {
                        if wants(k) {
                            accumulate(&mut grads[node.inputs[k]], part);
                        }
                    }
                }
            }
        }
        Ok(params)
    }
}
