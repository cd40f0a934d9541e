//! Training feed: a bounded prefetch queue of augmented patches.
//!
//! Producer threads prepare whole images (augment, then tile) and push
//! them into a bounded channel; the single consumer re-orders them by
//! position so batches do not depend on thread scheduling.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::sync_channel;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::augment::{augment, AugmentParams};
use super::classmap::Labels;
use super::dataset::Sample;
use super::image::{batch_tensor, FloatImage};
use super::patches::{extract_patches, PatchSpec};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct FeedConfig {
    pub batch_size: usize,
    pub patch: Option<PatchSpec>,
    /// `None` disables augmentation. The seed field is replaced per item.
    pub augment: Option<AugmentParams>,
    pub shuffle: bool,
    /// Images prepared ahead of the consumer.
    pub prefetch: usize,
    pub jobs: usize,
    pub seed: u64,
}

impl Default for FeedConfig {
    fn default() -> Self {
        FeedConfig {
            batch_size: 1,
            patch: None,
            augment: Some(AugmentParams::default()),
            shuffle: true,
            prefetch: 4,
            jobs: 1,
            seed: 0,
        }
    }
}

/// Images and labels of equal size.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub images: Vec<FloatImage>,
    pub labels: Vec<Labels>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Mean-subtracted `[n, h, w, 3]` input.
    pub fn input(&self) -> Result<Tensor> {
        batch_tensor(&self.images.iter().collect::<Vec<_>>())
    }

    /// Pads every item to the largest size; padding is ignored by the loss.
    pub fn collate(items: Vec<(FloatImage, Labels)>) -> Self {
        let w = items.iter().map(|(i, _)| i.width()).max().unwrap_or(0);
        let h = items.iter().map(|(i, _)| i.height()).max().unwrap_or(0);
        let (images, labels) = items
            .into_iter()
            .map(|(i, l)| {
                if (i.width(), i.height()) == (w, h) {
                    (i, l)
                } else {
                    (i.pad_to(w, h, 0.0), l.pad_to(w, h))
                }
            })
            .unzip();
        Batch { images, labels }
    }
}

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one image in one epoch.
pub fn item_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    mix(mix(mix(seed) ^ epoch as u64) ^ index as u64)
}

/// Augmented, tiled training pairs for one image.
pub fn prepare_item(sample: &Sample, config: &FeedConfig, seed: u64) -> Result<Vec<(FloatImage, Labels)>> {
    let (image, labels) = match &config.augment {
        Some(p) => augment(&sample.image, &sample.labels, &AugmentParams { seed, ..*p })?,
        None => (sample.image.clone(), sample.labels.clone()),
    };
    match &config.patch {
        Some(spec) => Ok(extract_patches(&image, Some(&labels), spec)?
            .into_iter()
            .map(|p| (p.image, p.labels.expect("labels passed")))
            .collect()),
        None => Ok(vec![(image, labels)]),
    }
}

/// Image visiting order for an epoch.
pub fn epoch_order(n: usize, config: &FeedConfig, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if config.shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(item_seed(config.seed, epoch, usize::MAX)));
    }
    order
}

/// Runs one epoch, handing batches to `consume` in a deterministic order.
///
/// Stops early and returns the first error from either side.
pub fn run_epoch(
    samples: &[Sample],
    config: &FeedConfig,
    epoch: usize,
    mut consume: impl FnMut(Batch) -> Result<()>,
) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Empty("training set is empty".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidParam("batch size must be positive".into()));
    }
    let order = epoch_order(samples.len(), config, epoch);
    let next = AtomicUsize::new(0);
    let (tx, rx) = sync_channel::<(usize, Result<Vec<(FloatImage, Labels)>>)>(config.prefetch.max(1));

    std::thread::scope(|scope| {
        for _ in 0..config.jobs.max(1) {
            let tx = tx.clone();
            let (order, next) = (&order, &next);
            scope.spawn(move || loop {
                let pos = next.fetch_add(1, Ordering::Relaxed);
                if pos >= order.len() {
                    break;
                }
                let idx = order[pos];
                let item = prepare_item(&samples[idx], config, item_seed(config.seed, epoch, idx));
                if tx.send((pos, item)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut pending = BTreeMap::new();
        let mut expected = 0;
        let mut buffer = Vec::with_capacity(config.batch_size);
        // Iterating by value drops the receiver on early return, unblocking producers.
        for (pos, item) in rx {
            pending.insert(pos, item);
            while let Some(item) = pending.remove(&expected) {
                expected += 1;
                for pair in item? {
                    buffer.push(pair);
                    if buffer.len() == config.batch_size {
                        consume(Batch::collate(std::mem::take(&mut buffer)))?;
                    }
                }
            }
        }
        if !buffer.is_empty() {
            consume(Batch::collate(buffer))?;
        }
        Ok(())
    })
}
