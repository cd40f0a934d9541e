use std::collections::BTreeMap;

use super::config::AdamParams;
use crate::error::Result;
use crate::netgraph::{Gradients, NetworkGraph, ParamKind, WeightStore};
use crate::tensor::Tensor;

/// Names of the convolution kernels that currently train.
pub fn trainable_kernels(graph: &NetworkGraph) -> Vec<String> {
    graph
        .layers
        .iter()
        .filter(|l| l.trainable)
        .flat_map(|l| l.params())
        .filter(|p| p.kind == ParamKind::Kernel)
        .map(|p| p.name)
        .collect()
}

/// `weight_decay · Σ w²` over `kernels`.
pub fn l2_penalty(weights: &WeightStore, kernels: &[String], weight_decay: f64) -> Result<f64> {
    let mut sum = 0.0f64;
    for name in kernels {
        sum += weights.get(name)?.data().iter().map(|&v| v as f64 * v as f64).sum::<f64>();
    }
    Ok(weight_decay * sum)
}

/// Adds the L2 gradient `2 · weight_decay · w` to each kernel gradient.
pub fn add_l2_gradient(grads: &mut Gradients, weights: &WeightStore, kernels: &[String], weight_decay: f64) -> Result<()> {
    if weight_decay == 0.0 {
        return Ok(());
    }
    let k = (2.0 * weight_decay) as f32;
    for name in kernels {
        let w = weights.get(name)?;
        let g = grads.entry(name.clone()).or_insert_with(|| Tensor::zeros(w.shape()));
        for (gi, wi) in g.data_mut().iter_mut().zip(w.data()) {
            *gi += k * wi;
        }
    }
    Ok(())
}

struct Moments {
    m: Vec<f32>,
    v: Vec<f32>,
}

/// Adam with bias correction; state is kept per tensor name.
pub struct Adam {
    params: AdamParams,
    step: u64,
    state: BTreeMap<String, Moments>,
}

impl Adam {
    pub fn new(params: AdamParams) -> Self {
        Adam {
            params,
            step: 0,
            state: BTreeMap::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, weights: &mut WeightStore, grads: &Gradients, lr: f64) -> Result<()> {
        self.step += 1;
        let AdamParams { beta1, beta2, epsilon } = self.params;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (name, g) in grads {
            let w = weights.get_mut(name)?;
            let st = self.state.entry(name.clone()).or_insert_with(|| Moments {
                m: vec![0.0; g.len()],
                v: vec![0.0; g.len()],
            });
            for (((wi, &gi), mi), vi) in w.data_mut().iter_mut().zip(g.data()).zip(&mut st.m).zip(&mut st.v) {
                let gi = gi as f64;
                let m = beta1 * *mi as f64 + (1.0 - beta1) * gi;
                let v = beta2 * *vi as f64 + (1.0 - beta2) * gi * gi;
                *mi = m as f32;
                *vi = v as f32;
                let step = lr * (m / c1) / ((v / c2).sqrt() + epsilon);
                *wi = (*wi as f64 - step) as f32;
            }
        }
        Ok(())
    }
}
