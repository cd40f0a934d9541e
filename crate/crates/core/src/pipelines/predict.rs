//! Inference: resize → network (optionally patched) → post-processing →
//! outputs at the original resolution.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use log::info;

use super::chain::{apply_chain, ChainContext, ChainOutput};
use super::output::{resize_mask, GeometryFile, Prediction};
use super::task::TaskConfig;
use crate::data::{budget_size, extract_patches, stitch_predictions, FloatImage, PatchSpec, IMAGE_EXTENSIONS};
use crate::error::{Error, Result};
use crate::netgraph::{build_graph, ArchConfig, Network, WeightStore};
use crate::postproc::{BinaryMask, Grid, ProbabilityMap};
use crate::tensor::Tensor;
use crate::train::load_checkpoint;

/// Anything that turns an image into per-pixel class probabilities.
pub trait ProbabilitySource: Sync {
    fn probabilities(&self, image: &FloatImage) -> Result<ProbabilityMap>;
}

/// A closure over images is a source (handy for injecting fixtures).
impl<F> ProbabilitySource for F
where
    F: Fn(&FloatImage) -> Result<ProbabilityMap> + Sync,
{
    fn probabilities(&self, image: &FloatImage) -> Result<ProbabilityMap> {
        self(image)
    }
}

/// The network with a shared, read-only weight store.
pub struct NetworkSource {
    network: Network,
    weights: WeightStore,
    patching: Option<PatchSpec>,
}

fn to_probability_map(t: &Tensor) -> Result<ProbabilityMap> {
    let (_, h, w, c) = t.nhwc();
    ProbabilityMap::new(w, h, c, t.data().iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

impl NetworkSource {
    pub fn new(arch: &ArchConfig, weights: WeightStore, patching: Option<PatchSpec>) -> Result<Self> {
        let graph = build_graph(arch)?;
        weights.check_compatible(&graph)?;
        Ok(NetworkSource {
            network: Network::new(graph),
            weights,
            patching,
        })
    }

    /// Loads a checkpoint for `task`. The sidecar's architecture, when
    /// present, overrides the task's (it must agree on the class count).
    pub fn from_checkpoint(task: &TaskConfig, path: impl AsRef<Path>) -> Result<Self> {
        let (weights, meta) = load_checkpoint(path)?;
        let arch = match meta {
            Some(m) => {
                if m.arch.n_classes != task.n_classes() {
                    return Err(Error::Task(format!(
                        "checkpoint predicts {} classes, task '{}' has {}",
                        m.arch.n_classes,
                        task.name.as_str(),
                        task.n_classes()
                    )));
                }
                m.arch
            }
            None => task.arch_config(),
        };
        Self::new(&arch, weights, task.patching)
            .map_err(|e| Error::Task(format!("weights do not fit task '{}': {e}", task.name.as_str())))
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    fn whole(&self, image: &FloatImage) -> Result<ProbabilityMap> {
        to_probability_map(&self.network.forward(&self.weights, &image.to_input_tensor()?)?)
    }
}

impl ProbabilitySource for NetworkSource {
    fn probabilities(&self, image: &FloatImage) -> Result<ProbabilityMap> {
        let Some(spec) = self.patching else {
            return self.whole(image);
        };
        let (w, h) = (image.width(), image.height());
        let patches = extract_patches(image, None, &spec)?;
        let maps = patches
            .iter()
            .map(|p| Ok((self.whole(&p.image)?, p.origin)))
            .collect::<Result<Vec<_>>>()?;
        let (cw, ch) = (w.max(spec.size.1), h.max(spec.size.0));
        let full = stitch_predictions(&maps, cw, ch)?;
        if (cw, ch) == (w, h) {
            return Ok(full);
        }
        let c = full.channels();
        let mut data = Vec::with_capacity(w * h * c);
        for y in 0..h {
            let row = y * cw * c;
            data.extend_from_slice(&full.data()[row..row + w * c]);
        }
        ProbabilityMap::new(w, h, c, data)
    }
}

/// Runs the task's chain on a probability map already at working size.
pub fn postprocess(task: &TaskConfig, map: &ProbabilityMap, page_mask: Option<&BinaryMask>) -> Result<ChainOutput> {
    if map.channels() != task.n_classes() {
        return Err(Error::Task(format!(
            "probability map has {} channels, task '{}' has {} classes",
            map.channels(),
            task.name.as_str(),
            task.n_classes()
        )));
    }
    apply_chain(
        &task.postprocessing,
        map,
        &task.target_indices()?,
        &task.class_names(),
        ChainContext { page_mask },
    )
}

/// Full prediction for one in-memory image. `page_mask`, if given, is at
/// the original resolution.
pub fn predict_image(
    task: &TaskConfig,
    source: &dyn ProbabilitySource,
    image: &FloatImage,
    name: &str,
    page_mask: Option<&BinaryMask>,
) -> Result<Prediction> {
    let original = (image.width(), image.height());
    let working = match task.resize_budget {
        Some(b) => budget_size(original.0, original.1, b)?,
        None => original,
    };
    let resized = if working == original {
        image.clone()
    } else {
        image.resize_bilinear(working.0, working.1)
    };
    let map = source.probabilities(&resized)?;
    if (map.width(), map.height()) != working {
        return Err(Error::Shape(format!(
            "probability map is {}x{}, expected {}x{}",
            map.width(),
            map.height(),
            working.0,
            working.1
        )));
    }
    let page = page_mask.map(|m| resize_mask(m, working.0, working.1));
    let out = postprocess(task, &map, page.as_ref())?;
    Prediction::from_chain(
        &out,
        name,
        task.name.as_str(),
        &task.class_names(),
        &task.target_indices()?,
        working,
        original,
    )
}

/// Union of a page prediction's masks, used to restrict layout outputs.
pub fn page_region(prediction: &Prediction) -> Option<BinaryMask> {
    let (first, rest) = prediction.masks.split_first()?;
    let mut m = first.1.clone();
    for (_, other) in rest {
        m = m.or(other).ok()?;
    }
    Some(m)
}

/// A page model used to mask another task's outputs.
pub struct PageModel<'a> {
    pub task: &'a TaskConfig,
    pub source: &'a dyn ProbabilitySource,
}

pub struct PredictOptions<'a> {
    pub jobs: usize,
    pub page: Option<PageModel<'a>>,
}

impl Default for PredictOptions<'_> {
    fn default() -> Self {
        PredictOptions { jobs: 1, page: None }
    }
}

/// Expands directories into their images (sorted); files pass through.
pub fn collect_images(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found = Vec::new();
            for entry in std::fs::read_dir(p).map_err(|e| Error::io(p, e))? {
                let path = entry.map_err(|e| Error::io(p, e))?.path();
                let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
                if ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
                    found.push(path);
                }
            }
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(Error::Empty("no input images".into()));
    }
    Ok(out)
}

fn stem_of(path: &Path) -> Result<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_owned)
        .ok_or_else(|| Error::Dataset(format!("{} has no file stem", path.display())))
}

/// Predicts every image and writes `<stem>.json` and `<stem>_<class>.png`
/// into `out_dir`. Images are processed by `jobs` workers; results are
/// returned in input order.
pub fn run_predict(
    task: &TaskConfig,
    source: &dyn ProbabilitySource,
    inputs: &[PathBuf],
    out_dir: impl AsRef<Path>,
    options: &PredictOptions<'_>,
) -> Result<Vec<GeometryFile>> {
    task.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let images = collect_images(inputs)?;
    let mut stems = std::collections::BTreeSet::new();
    for p in &images {
        if !stems.insert(stem_of(p)?) {
            return Err(Error::Dataset(format!("duplicate image stem for {}", p.display())));
        }
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<GeometryFile>>>> = Mutex::new((0..images.len()).map(|_| None).collect());
    let one = |path: &Path| -> Result<GeometryFile> {
        let image = FloatImage::load(path)?;
        let name = path.file_name().and_then(|s| s.to_str()).unwrap_or_default();
        let page = match &options.page {
            Some(pm) => page_region(&predict_image(pm.task, pm.source, &image, name, None)?),
            None => None,
        };
        let pred = predict_image(task, source, &image, name, page.as_ref())?;
        pred.write(out_dir, &stem_of(path)?)?;
        info!("{}: {} shapes", path.display(), pred.geometry.shapes.len());
        Ok(pred.geometry)
    };
    std::thread::scope(|s| {
        for _ in 0..options.jobs.clamp(1, images.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(path) = images.get(i) else { break };
                let r = one(path).map_err(|e| match e {
                    e @ Error::Io { .. } | e @ Error::Image { .. } => e,
                    e => Error::Task(format!("{}: {e}", path.display())),
                });
                let failed = r.is_err();
                results.lock().expect("no panics while locked")[i] = Some(r);
                if failed {
                    // Stop handing out work after the first failure.
                    next.store(images.len(), Ordering::Relaxed);
                }
            });
        }
    });
    results
        .into_inner()
        .expect("no panics while locked")
        .into_iter()
        .flatten()
        .collect()
}

/// Empty probability map helper for tests and examples: every pixel is
/// background with probability 1.
pub fn background_map(width: usize, height: usize, n_classes: usize) -> ProbabilityMap {
    let mut channels = vec![Grid::new(width, height, 0.0f32); n_classes];
    channels[0] = Grid::new(width, height, 1.0);
    ProbabilityMap::from_channels(&channels).expect("consistent sizes")
}
