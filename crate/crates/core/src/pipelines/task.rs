//! Task definitions: class map, sizing, training overrides and the
//! post-processing chain, loadable from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chain::{check_chain, PostOp};
use crate::data::{AugmentParams, ClassMap, CompositeColor, PatchSpec, BASELINE_RADIUS};
use crate::error::{Error, Result};
use crate::netgraph::{ArchConfig, OutputMode};
use crate::postproc::{Connectivity, StructuringElement, DEFAULT_POLYLINE_EPSILON};
use crate::train::{LossMode, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Page,
    Baseline,
    Layout,
    Ornament,
    Photo,
    Custom,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Page => "page",
            TaskKind::Baseline => "baseline",
            TaskKind::Layout => "layout",
            TaskKind::Ornament => "ornament",
            TaskKind::Photo => "photo",
            TaskKind::Custom => "custom",
        }
    }
}

/// Architecture knobs a task may change; class count and output head
/// follow the class map.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reduction_channels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decoder_channels: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub name: TaskKind,
    pub classmap: ClassMap,
    /// Images are shrunk to at most this many pixels; `None` keeps sizes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resize_budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patching: Option<PatchSpec>,
    /// Classes the post-processing chain runs on; defaults to every class
    /// but the first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<String>>,
    /// Half-width used when rendering baseline annotations.
    #[serde(default = "default_radius")]
    pub baseline_radius: u32,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub arch: ArchOverrides,
    pub postprocessing: Vec<PostOp>,
}

fn default_radius() -> u32 {
    BASELINE_RADIUS
}

/// Names accepted by [`builtin_task`].
pub const BUILTIN_TASKS: [&str; 6] = ["page", "baseline", "layout", "layout-large", "ornament", "photo"];

fn base(name: TaskKind, classmap: ClassMap, postprocessing: Vec<PostOp>) -> TaskConfig {
    TaskConfig {
        name,
        classmap,
        resize_budget: None,
        patching: None,
        targets: None,
        baseline_radius: BASELINE_RADIUS,
        train: TrainConfig {
            epochs: 30,
            augment: Some(AugmentParams::default()),
            ..Default::default()
        },
        arch: ArchOverrides::default(),
        postprocessing,
    }
}

fn layout_classmap() -> ClassMap {
    // Colour codes carry one bit per class in the blue channel.
    let classes = [("background", 1u8), ("comment", 2), ("decoration", 4), ("text", 8)];
    let mut map = ClassMap::exclusive(classes.iter().map(|&(n, b)| (n, [0, 0, b]))).expect("valid");
    map.multilabel = true;
    map.composites = vec![
        CompositeColor {
            color: [0, 0, 6],
            classes: vec!["comment".into(), "decoration".into()],
        },
        CompositeColor {
            color: [0, 0, 10],
            classes: vec!["comment".into(), "text".into()],
        },
        CompositeColor {
            color: [0, 0, 12],
            classes: vec!["decoration".into(), "text".into()],
        },
    ];
    map
}

fn layout(patch: usize, batch_size: usize) -> TaskConfig {
    let mut t = base(
        TaskKind::Layout,
        layout_classmap(),
        vec![
            PostOp::Threshold { value: 0.5 },
            PostOp::FilterSmallComponents {
                min_size: 50,
                connectivity: Connectivity::Eight,
            },
            PostOp::IntersectPageMask,
        ],
    );
    t.patching = Some(PatchSpec::square(patch, 75).expect("valid patch"));
    t.train.batch_size = batch_size;
    t.train.loss_mode = LossMode::SigmoidBce;
    t
}

/// One of the predefined task set-ups (see [`BUILTIN_TASKS`]).
pub fn builtin_task(name: &str) -> Result<TaskConfig> {
    let sq = StructuringElement::default();
    let task = match name {
        "page" => {
            let mut t = base(
                TaskKind::Page,
                ClassMap::exclusive([("background", [0, 0, 0]), ("page", [255, 0, 0])])?,
                vec![
                    PostOp::Otsu,
                    PostOp::Open(sq),
                    PostOp::Close(sq),
                    PostOp::ExtremeQuad { largest_component: true },
                ],
            );
            t.resize_budget = Some(600_000);
            t.train.batch_size = 1;
            t
        }
        "baseline" => {
            let mut t = base(
                TaskKind::Baseline,
                ClassMap::exclusive([("background", [0, 0, 0]), ("baseline", [255, 0, 0])])?,
                vec![
                    PostOp::Gaussian { sigma: 1.5 },
                    PostOp::Hysteresis {
                        high: 0.4,
                        low: 0.2,
                        connectivity: Connectivity::Eight,
                    },
                    PostOp::ConnectedComponents {
                        connectivity: Connectivity::Eight,
                    },
                    PostOp::VectorizePolyline {
                        epsilon: DEFAULT_POLYLINE_EPSILON,
                    },
                ],
            );
            t.resize_budget = Some(1_000_000);
            t.patching = Some(PatchSpec::default());
            t.train.batch_size = 8;
            t
        }
        "layout" => layout(400, 8),
        "layout-large" => layout(600, 4),
        "ornament" => {
            let mut t = base(
                TaskKind::Ornament,
                ClassMap::exclusive([("background", [0, 0, 0]), ("ornament", [255, 0, 0])])?,
                vec![
                    PostOp::Threshold { value: 0.6 },
                    PostOp::Open(sq),
                    PostOp::Close(sq),
                    PostOp::ConnectedComponents {
                        connectivity: Connectivity::Eight,
                    },
                    PostOp::EnclosingBox,
                    PostOp::FilterSmallBoxes {
                        min_area_fraction: 0.005,
                    },
                ],
            );
            t.resize_budget = Some(800_000);
            t.train.batch_size = 16;
            t
        }
        "photo" => {
            let mut t = base(
                TaskKind::Photo,
                ClassMap::exclusive([
                    ("background", [0, 0, 0]),
                    ("cardboard", [0, 0, 255]),
                    ("photo", [255, 0, 0]),
                ])?,
                vec![
                    PostOp::Argmax,
                    PostOp::Open(sq),
                    PostOp::LargestComponent {
                        connectivity: Connectivity::Eight,
                    },
                    PostOp::EnclosingBox,
                    PostOp::EnforceEnclosure {
                        inner: "photo".into(),
                        outer: "cardboard".into(),
                    },
                ],
            );
            t.resize_budget = Some(1_000_000);
            t.patching = Some(PatchSpec::default());
            t.train.batch_size = 8;
            t.train.epochs = 40;
            t
        }
        other => {
            return Err(Error::Task(format!(
                "unknown task '{other}'; built-in tasks are {}",
                BUILTIN_TASKS.join(", ")
            )))
        }
    };
    task.validate()?;
    Ok(task)
}

impl TaskConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let t: TaskConfig = toml::from_str(text)?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Task(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn n_classes(&self) -> usize {
        self.classmap.len()
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classmap.classes.iter().map(|c| c.name.clone()).collect()
    }

    /// Class indices the chain produces outputs for.
    pub fn target_indices(&self) -> Result<Vec<usize>> {
        match &self.targets {
            Some(names) => names.iter().map(|n| self.classmap.index_of(n)).collect(),
            None => Ok((1..self.n_classes()).collect()),
        }
    }

    pub fn arch_config(&self) -> ArchConfig {
        let mut arch = ArchConfig::with_classes(self.n_classes());
        arch.output = if self.classmap.multilabel {
            OutputMode::Sigmoid
        } else {
            OutputMode::Softmax
        };
        if let Some(r) = self.arch.reduction_channels {
            arch.reduction_channels = r;
        }
        if let Some(d) = &self.arch.decoder_channels {
            arch.decoder_channels = d.clone();
        }
        arch
    }

    /// Training settings with the task's patching applied.
    pub fn train_config(&self) -> TrainConfig {
        let mut cfg = self.train.clone();
        cfg.patch = self.patching;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.classmap.validate()?;
        if self.n_classes() < 2 {
            return Err(Error::Task("a task needs at least two classes".into()));
        }
        self.arch_config().validate()?;
        let expected = if self.classmap.multilabel {
            LossMode::SigmoidBce
        } else {
            LossMode::SoftmaxCe
        };
        if self.train.loss_mode != expected {
            return Err(Error::Task(format!(
                "loss_mode {:?} does not suit a {} class map",
                self.train.loss_mode,
                if self.classmap.multilabel { "multi-label" } else { "exclusive" }
            )));
        }
        self.train_config().validate()?;
        if let Some(p) = &self.patching {
            p.validate()?;
        }
        if self.resize_budget == Some(0) {
            return Err(Error::Task("resize_budget must be positive".into()));
        }
        let targets = self.target_indices()?;
        if targets.is_empty() {
            return Err(Error::Task("no target classes".into()));
        }
        check_chain(&self.postprocessing, &self.class_names()).map(|_| ())
    }
}
