//! The epoch loop: feed → forward → loss → backward → Adam.

use std::path::Path;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::config::{lr_schedule, LossMode, TrainConfig};
use super::loss::pixel_loss;
use super::optim::{add_l2_gradient, l2_penalty, trainable_kernels, Adam};
use crate::data::{run_epoch, FeedConfig, Sample};
use crate::error::{Error, Result};
use crate::netgraph::{Network, NetworkGraph, OutputMode, WeightStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub epoch: usize,
    pub lr: f64,
    /// Data loss plus L2 penalty.
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    /// Mean step loss per epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: Vec<StepRecord>,
}

impl History {
    /// `step,lr,loss` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::Train(format!("{}: {e}", path.display())))?;
        let to_err = |e: csv::Error| Error::Train(format!("{}: {e}", path.display()));
        w.write_record(["step", "epoch", "lr", "loss"]).map_err(to_err)?;
        for s in &self.steps {
            w.write_record([s.step.to_string(), s.epoch.to_string(), format!("{:e}", s.lr), s.loss.to_string()])
                .map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Summary handed to the end-of-epoch callback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Optimiser steps taken so far.
    pub steps: u64,
    pub mean_loss: f64,
}

type StepHook<'a> = &'a mut dyn FnMut(&StepRecord, &WeightStore) -> Result<()>;
type EpochHook<'a> = &'a mut dyn FnMut(&EpochRecord, &WeightStore) -> Result<()>;

/// Runtime knobs that do not change the result.
#[derive(Default)]
pub struct FitOptions<'a> {
    /// Producer threads preparing training images (0 is treated as 1).
    pub jobs: usize,
    /// Called after every optimiser step.
    pub on_step: Option<StepHook<'a>>,
    /// Called after every epoch.
    pub on_epoch: Option<EpochHook<'a>>,
}

fn check_setup(graph: &NetworkGraph, samples: &[Sample], config: &TrainConfig) -> Result<()> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("training set is empty".into()));
    }
    let n = graph.n_classes();
    if let Some(s) = samples.iter().find(|s| s.labels.n_classes != n) {
        return Err(Error::Train(format!(
            "{} has {} classes, the network predicts {n}",
            s.stem, s.labels.n_classes
        )));
    }
    let expected = match config.loss_mode {
        LossMode::SoftmaxCe => OutputMode::Softmax,
        LossMode::SigmoidBce => OutputMode::Sigmoid,
    };
    if graph.config.output != expected {
        return Err(Error::Train(format!(
            "loss {:?} does not match the {:?} output head",
            config.loss_mode, graph.config.output
        )));
    }
    Ok(())
}

/// Trains `weights` in place; see [`fit_with`].
pub fn fit(graph: &NetworkGraph, weights: &mut WeightStore, samples: &[Sample], config: &TrainConfig) -> Result<History> {
    fit_with(graph, weights, samples, config, FitOptions::default())
}

/// Runs `config.epochs` passes over `samples` with Adam on pixel loss + L2.
///
/// Deterministic for a given seed regardless of `jobs`. A non-finite loss
/// aborts with a diagnostic naming the step.
pub fn fit_with(
    graph: &NetworkGraph,
    weights: &mut WeightStore,
    samples: &[Sample],
    config: &TrainConfig,
    mut options: FitOptions<'_>,
) -> Result<History> {
    check_setup(graph, samples, config)?;
    let mut graph = graph.clone();
    if config.freeze_encoder {
        graph.set_encoder_trainable(false);
    }
    weights.check_compatible(&graph)?;
    let kernels = trainable_kernels(&graph);
    let network = Network::new(graph);
    let mut adam = Adam::new(config.adam);
    let mut history = History::default();
    let feed = FeedConfig {
        batch_size: config.batch_size,
        patch: config.patch,
        augment: config.augment,
        shuffle: true,
        prefetch: config.prefetch,
        jobs: options.jobs.max(1),
        seed: config.seed,
    };
    let momentum = config.batch_renorm.momentum;

    for epoch in 0..config.epochs {
        let mut sum = 0.0;
        let mut count = 0usize;
        run_epoch(samples, &feed, epoch, |batch| {
            let step = adam.steps();
            let lr = lr_schedule(step, config);
            let input = batch.input()?;
            let (logits, tape) = network.forward_train(weights, &input, &config.batch_renorm)?;
            let (data_loss, dlogits) = pixel_loss(&logits, &batch.labels, config.loss_mode)?;
            let loss = data_loss + l2_penalty(weights, &kernels, config.weight_decay)?;
            if !loss.is_finite() {
                return Err(Error::Train(format!(
                    "loss became {loss} at step {step} (epoch {epoch}, lr {lr:e}); try a lower learning rate"
                )));
            }
            let mut grads = network.backward(weights, &tape, &dlogits)?;
            add_l2_gradient(&mut grads, weights, &kernels, config.weight_decay)?;
            adam.update(weights, &grads, lr)?;
            tape.apply_stat_updates(weights, momentum as f32)?;
            let record = StepRecord { step, epoch, lr, loss };
            debug!("step {step} epoch {epoch} lr {lr:.3e} loss {loss:.5}");
            history.steps.push(record);
            if let Some(cb) = options.on_step.as_mut() {
                cb(&record, weights)?;
            }
            sum += loss;
            count += 1;
            Ok(())
        })?;
        let mean = sum / count.max(1) as f64;
        info!("epoch {} / {}: mean loss {mean:.5}", epoch + 1, config.epochs);
        history.epoch_losses.push(mean);
        if let Some(cb) = options.on_epoch.as_mut() {
            let record = EpochRecord {
                epoch,
                steps: adam.steps(),
                mean_loss: mean,
            };
            cb(&record, weights)?;
        }
    }
    Ok(history)
}
