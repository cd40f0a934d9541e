//! Training a task from a dataset directory.

use std::path::{Path, PathBuf};

use log::{info, warn};

use super::task::TaskConfig;
use crate::data::{load_samples, Dataset};
use crate::error::{Error, Result};
use crate::netgraph::{build_graph, WeightStore};
use crate::train::{fit_with, load_checkpoint, save_checkpoint, CheckpointMeta, EpochRecord, FitOptions, History};

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Overrides the task's training seed.
    pub seed: Option<u64>,
    pub jobs: usize,
    /// Starting weights (e.g. an encoder converted from pretrained
    /// classification weights); random initialisation otherwise.
    pub init_weights: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: History,
    /// One checkpoint per epoch, in order.
    pub checkpoints: Vec<PathBuf>,
    /// Copy of the last epoch's checkpoint.
    pub final_weights: PathBuf,
    pub log: PathBuf,
}

/// File name of the checkpoint written after `epoch` (0-based).
pub fn epoch_checkpoint_name(epoch: usize) -> String {
    format!("epoch_{:03}.safetensors", epoch + 1)
}

/// Trains `task` on `dataset_dir` (`images/` + `labels/`) and writes into
/// `out_dir`: per-epoch checkpoints with JSON sidecars, `model.safetensors`,
/// `train_log.csv` (`step,epoch,lr,loss`) and the effective `task.toml`.
///
/// The dataset is fully validated before the first step.
pub fn run_train(
    task: &TaskConfig,
    dataset_dir: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
    options: &TrainOptions,
) -> Result<TrainOutcome> {
    task.validate()?;
    let dataset_dir = dataset_dir.as_ref();
    let out_dir = out_dir.as_ref();
    if !dataset_dir.join("labels").is_dir() {
        return Err(Error::Dataset(format!("{} has no labels/ directory", dataset_dir.display())));
    }
    let dataset = Dataset::discover(dataset_dir, true)?;
    let samples = load_samples(&dataset, &task.classmap, task.resize_budget, task.baseline_radius)?;
    info!("loaded {} training images", samples.len());

    let arch = task.arch_config();
    let graph = build_graph(&arch)?;
    let mut config = task.train_config();
    if let Some(seed) = options.seed {
        config.seed = seed;
    }
    let mut weights = match &options.init_weights {
        Some(p) => {
            let (w, _) = load_checkpoint(p)?;
            w.check_compatible(&graph)?;
            w
        }
        None => {
            warn!("no initial weights given: the encoder starts from random values");
            WeightStore::xavier(&graph, config.seed)
        }
    };

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut effective = task.clone();
    effective.train = config.clone();
    effective.train.patch = None;
    effective.save(out_dir.join("task.toml"))?;

    let hash = config.hash();
    let mut checkpoints = Vec::new();
    let mut save = |r: &EpochRecord, w: &WeightStore| {
        let path = out_dir.join(epoch_checkpoint_name(r.epoch));
        let meta = CheckpointMeta {
            step: r.steps,
            epoch: r.epoch + 1,
            config_hash: hash.clone(),
            arch: arch.clone(),
        };
        save_checkpoint(&path, w, &meta)?;
        info!("epoch {}: mean loss {:.5}, saved {}", r.epoch + 1, r.mean_loss, path.display());
        checkpoints.push(path);
        Ok(())
    };
    let history = fit_with(
        &graph,
        &mut weights,
        &samples,
        &config,
        FitOptions {
            jobs: options.jobs,
            on_step: None,
            on_epoch: Some(&mut save),
        },
    )?;

    let final_weights = out_dir.join("model.safetensors");
    save_checkpoint(
        &final_weights,
        &weights,
        &CheckpointMeta {
            step: history.steps.len() as u64,
            epoch: config.epochs,
            config_hash: hash,
            arch,
        },
    )?;
    let log = out_dir.join("train_log.csv");
    history.write_csv(&log)?;
    Ok(TrainOutcome {
        history,
        checkpoints,
        final_weights,
        log,
    })
}
