//! Post-processing chains: a declarative operator list checked by stage
//! and run per target class.

use log::debug;
use serde::{Deserialize, Serialize};

use super::output::Shape;
use crate::error::{Error, Result};
use crate::postproc::{
    enforce_enclosure, extract_extreme_quad, filter_small_components, gaussian_filter, hysteresis_threshold,
    label_components, largest_component, min_enclosing_box, morph, threshold_fixed, threshold_otsu,
    vectorize_polyline, AxisAlignedBox, BinaryMask, Components, Connectivity, Grid, MorphOp, ProbabilityChannel,
    ProbabilityMap, StructuringElement, DEFAULT_POLYLINE_EPSILON,
};

/// The kind of value flowing between operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Per-class probability planes.
    Planes,
    Masks,
    Components,
    Geometry,
}

fn default_true() -> bool {
    true
}

fn default_epsilon() -> f64 {
    DEFAULT_POLYLINE_EPSILON
}

/// One post-processing step. In TOML: `{ op = "threshold", value = 0.5 }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum PostOp {
    /// Planes → planes.
    Gaussian { sigma: f64 },
    /// Planes → masks.
    Otsu,
    /// Planes → masks, `p >= value`.
    Threshold { value: f32 },
    /// Planes → masks.
    Hysteresis {
        high: f32,
        low: f32,
        #[serde(default)]
        connectivity: Connectivity,
    },
    /// Planes → masks: pixels where the class is the most probable.
    Argmax,
    /// Masks → masks.
    Erode(StructuringElement),
    Dilate(StructuringElement),
    Open(StructuringElement),
    Close(StructuringElement),
    FilterSmallComponents {
        min_size: usize,
        #[serde(default)]
        connectivity: Connectivity,
    },
    LargestComponent {
        #[serde(default)]
        connectivity: Connectivity,
    },
    /// Masks → masks: keep only pixels inside the page mask when one is
    /// supplied; a no-op otherwise.
    IntersectPageMask,
    /// Masks → components.
    ConnectedComponents {
        #[serde(default)]
        connectivity: Connectivity,
    },
    /// Masks → geometry: one quad per class from the extreme corner points,
    /// fitted to the largest 8-connected component by default.
    ExtremeQuad {
        #[serde(default = "default_true")]
        largest_component: bool,
    },
    /// Components → geometry: one polyline per component.
    VectorizePolyline {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
    /// Masks → geometry (one box per class) or components → geometry (one
    /// box per component).
    EnclosingBox,
    /// Geometry → geometry: drops boxes below a fraction of the image area.
    FilterSmallBoxes { min_area_fraction: f64 },
    /// Geometry → geometry: clips each `inner` box to the `outer` box it
    /// overlaps most; inner boxes touching no outer box are dropped.
    EnforceEnclosure { inner: String, outer: String },
}

impl PostOp {
    pub fn name(&self) -> &'static str {
        match self {
            PostOp::Gaussian { .. } => "gaussian",
            PostOp::Otsu => "otsu",
            PostOp::Threshold { .. } => "threshold",
            PostOp::Hysteresis { .. } => "hysteresis",
            PostOp::Argmax => "argmax",
            PostOp::Erode(_) => "erode",
            PostOp::Dilate(_) => "dilate",
            PostOp::Open(_) => "open",
            PostOp::Close(_) => "close",
            PostOp::FilterSmallComponents { .. } => "filter_small_components",
            PostOp::LargestComponent { .. } => "largest_component",
            PostOp::IntersectPageMask => "intersect_page_mask",
            PostOp::ConnectedComponents { .. } => "connected_components",
            PostOp::ExtremeQuad { .. } => "extreme_quad",
            PostOp::VectorizePolyline { .. } => "vectorize_polyline",
            PostOp::EnclosingBox => "enclosing_box",
            PostOp::FilterSmallBoxes { .. } => "filter_small_boxes",
            PostOp::EnforceEnclosure { .. } => "enforce_enclosure",
        }
    }

    /// Output stage for a given input stage, or `None` if the operator does
    /// not accept it.
    pub fn transition(&self, input: Stage) -> Option<Stage> {
        use Stage::*;
        match (self, input) {
            (PostOp::Gaussian { .. }, Planes) => Some(Planes),
            (PostOp::Otsu | PostOp::Threshold { .. } | PostOp::Hysteresis { .. } | PostOp::Argmax, Planes) => {
                Some(Masks)
            }
            (
                PostOp::Erode(_)
                | PostOp::Dilate(_)
                | PostOp::Open(_)
                | PostOp::Close(_)
                | PostOp::FilterSmallComponents { .. }
                | PostOp::LargestComponent { .. }
                | PostOp::IntersectPageMask,
                Masks,
            ) => Some(Masks),
            (PostOp::ConnectedComponents { .. }, Masks) => Some(Components),
            (PostOp::ExtremeQuad { .. }, Masks) => Some(Geometry),
            (PostOp::VectorizePolyline { .. }, Components) => Some(Geometry),
            (PostOp::EnclosingBox, Masks | Components) => Some(Geometry),
            (PostOp::FilterSmallBoxes { .. } | PostOp::EnforceEnclosure { .. }, Geometry) => Some(Geometry),
            _ => None,
        }
    }

    fn check_params(&self, class_names: &[String]) -> Result<()> {
        let bad = |m: String| Err(Error::Task(format!("{}: {m}", self.name())));
        let unit = |v: f32| (0.0..=1.0).contains(&v);
        match self {
            PostOp::Gaussian { sigma } if !(*sigma > 0.0) => bad(format!("sigma must be positive, got {sigma}")),
            PostOp::Threshold { value } if !unit(*value) => bad(format!("value {value} outside [0, 1]")),
            PostOp::Hysteresis { high, low, .. } if !(unit(*low) && unit(*high) && low <= high) => {
                bad(format!("need 0 <= low <= high <= 1, got low {low}, high {high}"))
            }
            PostOp::Erode(s) | PostOp::Dilate(s) | PostOp::Open(s) | PostOp::Close(s) => {
                s.validate().or_else(|e| bad(e.to_string()))
            }
            PostOp::VectorizePolyline { epsilon } if !(*epsilon >= 0.0) => {
                bad(format!("epsilon must be >= 0, got {epsilon}"))
            }
            PostOp::FilterSmallBoxes { min_area_fraction } if !(0.0..1.0).contains(min_area_fraction) => {
                bad(format!("min_area_fraction {min_area_fraction} outside [0, 1)"))
            }
            PostOp::EnforceEnclosure { inner, outer } => {
                for c in [inner, outer] {
                    if !class_names.contains(c) {
                        return bad(format!("unknown class '{c}'"));
                    }
                }
                if inner == outer {
                    return bad("inner and outer must differ".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Verifies stage compatibility and parameters; the chain must end with
/// masks or geometry.
pub fn check_chain(ops: &[PostOp], class_names: &[String]) -> Result<Stage> {
    let mut stage = Stage::Planes;
    for (i, op) in ops.iter().enumerate() {
        op.check_params(class_names)?;
        stage = op.transition(stage).ok_or_else(|| {
            Error::Task(format!(
                "post-processing step {} ({}) cannot follow {:?} output",
                i + 1,
                op.name(),
                stage
            ))
        })?;
    }
    match stage {
        Stage::Masks | Stage::Geometry => Ok(stage),
        s => Err(Error::Task(format!("post-processing must end with masks or geometry, not {s:?}"))),
    }
}

/// Per-image inputs beyond the probability map.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChainContext<'a> {
    /// Page region at working resolution, for [`PostOp::IntersectPageMask`].
    pub page_mask: Option<&'a BinaryMask>,
}

/// Results at working resolution, keyed by class index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainOutput {
    /// Masks from the last mask-producing step.
    pub masks: Vec<(usize, BinaryMask)>,
    pub shapes: Vec<(usize, Shape)>,
}

enum State {
    Planes(Vec<ProbabilityChannel>),
    Masks(Vec<(usize, BinaryMask)>),
    Components(Vec<(usize, Components)>),
    Geometry(Vec<(usize, Shape)>),
}

fn each_mask(
    state: State,
    mut f: impl FnMut(usize, BinaryMask) -> Result<BinaryMask>,
) -> Result<Vec<(usize, BinaryMask)>> {
    match state {
        State::Masks(ms) => ms.into_iter().map(|(c, m)| Ok((c, f(c, m)?))).collect(),
        _ => unreachable!("stage checked"),
    }
}

fn enforce(shapes: Vec<(usize, Shape)>, inner: usize, outer: usize) -> Vec<(usize, Shape)> {
    let outers: Vec<AxisAlignedBox> = shapes
        .iter()
        .filter_map(|(c, s)| match s {
            Shape::Box(b) if *c == outer => Some(*b),
            _ => None,
        })
        .collect();
    if outers.is_empty() {
        return shapes;
    }
    shapes
        .into_iter()
        .filter_map(|(c, s)| match s {
            Shape::Box(b) if c == inner => {
                let best = outers
                    .iter()
                    .max_by_key(|o| b.intersection(o).map_or(0, |i| i.area()))
                    .expect("non-empty");
                enforce_enclosure(&b, best).ok().map(|clipped| (c, Shape::Box(clipped)))
            }
            _ => Some((c, s)),
        })
        .collect()
}

/// Runs `ops` on `map` for the `targets` classes.
pub fn apply_chain(
    ops: &[PostOp],
    map: &ProbabilityMap,
    targets: &[usize],
    class_names: &[String],
    ctx: ChainContext<'_>,
) -> Result<ChainOutput> {
    check_chain(ops, class_names)?;
    if let Some(&t) = targets.iter().find(|&&t| t >= map.channels()) {
        return Err(Error::Task(format!(
            "target class {t} missing from a {}-channel probability map",
            map.channels()
        )));
    }
    let (w, h) = (map.width(), map.height());
    let index = |name: &str| class_names.iter().position(|n| n == name).expect("checked");
    let mut state = State::Planes((0..map.channels()).map(|c| map.channel(c)).collect::<Result<_>>()?);
    let mut out = ChainOutput::default();
    for op in ops {
        state = match op {
            PostOp::Gaussian { sigma } => match state {
                State::Planes(ps) => State::Planes(ps.iter().map(|p| gaussian_filter(p, *sigma)).collect::<Result<_>>()?),
                _ => unreachable!(),
            },
            PostOp::Otsu | PostOp::Threshold { .. } | PostOp::Hysteresis { .. } | PostOp::Argmax => {
                let State::Planes(ps) = state else { unreachable!() };
                let argmax = matches!(op, PostOp::Argmax)
                    .then(|| ProbabilityMap::from_channels(&ps).map(|m| m.argmax()))
                    .transpose()?;
                let masks = targets
                    .iter()
                    .map(|&c| {
                        let p = &ps[c];
                        let m = match op {
                            PostOp::Otsu => match threshold_otsu(p) {
                                Ok((_, m)) => m,
                                // A constant plane has no split: nothing stands out.
                                Err(Error::Degenerate(_)) => Grid::new(w, h, false),
                                Err(e) => return Err(e),
                            },
                            PostOp::Threshold { value } => threshold_fixed(p, *value)?,
                            PostOp::Hysteresis {
                                high,
                                low,
                                connectivity,
                            } => hysteresis_threshold(p, *low, *high, *connectivity)?,
                            _ => argmax.as_ref().expect("computed").map(|&k| k as usize == c),
                        };
                        Ok((c, m))
                    })
                    .collect::<Result<Vec<_>>>()?;
                State::Masks(masks)
            }
            PostOp::Erode(s) | PostOp::Dilate(s) | PostOp::Open(s) | PostOp::Close(s) => {
                let mop = match op {
                    PostOp::Erode(_) => MorphOp::Erode,
                    PostOp::Dilate(_) => MorphOp::Dilate,
                    PostOp::Open(_) => MorphOp::Open,
                    _ => MorphOp::Close,
                };
                State::Masks(each_mask(state, |_, m| morph(&m, mop, s))?)
            }
            PostOp::FilterSmallComponents { min_size, connectivity } => State::Masks(each_mask(state, |_, m| {
                Ok(filter_small_components(&label_components(&m, *connectivity), *min_size))
            })?),
            PostOp::LargestComponent { connectivity } => State::Masks(each_mask(state, |_, m| {
                Ok(largest_component(&label_components(&m, *connectivity)))
            })?),
            PostOp::IntersectPageMask => match ctx.page_mask {
                Some(page) => State::Masks(each_mask(state, |_, m| m.and(page))?),
                None => state,
            },
            PostOp::ConnectedComponents { connectivity } => {
                let State::Masks(ms) = state else { unreachable!() };
                State::Components(ms.iter().map(|(c, m)| (*c, label_components(m, *connectivity))).collect())
            }
            PostOp::ExtremeQuad { largest_component: lc } => {
                let State::Masks(ms) = state else { unreachable!() };
                let mut shapes = Vec::new();
                for (c, m) in &ms {
                    let m = if *lc {
                        largest_component(&label_components(m, Connectivity::Eight))
                    } else {
                        m.clone()
                    };
                    if m.count() == 0 {
                        continue;
                    }
                    match extract_extreme_quad(&m) {
                        Ok(q) => shapes.push((*c, Shape::Quad(q))),
                        Err(Error::Degenerate(e)) => debug!("class {c}: no quad ({e})"),
                        Err(e) => return Err(e),
                    }
                }
                State::Geometry(shapes)
            }
            PostOp::VectorizePolyline { epsilon } => {
                let State::Components(cs) = state else { unreachable!() };
                let mut shapes = Vec::new();
                for (c, cc) in &cs {
                    for px in cc.pixel_lists() {
                        match vectorize_polyline(&px, *epsilon) {
                            Ok(l) => shapes.push((*c, Shape::Polyline(l))),
                            Err(Error::Degenerate(e)) => debug!("class {c}: component skipped ({e})"),
                            Err(e) => return Err(e),
                        }
                    }
                }
                State::Geometry(shapes)
            }
            PostOp::EnclosingBox => match state {
                State::Masks(ms) => State::Geometry(
                    ms.iter()
                        .filter(|(_, m)| m.count() > 0)
                        .map(|(c, m)| Ok((*c, Shape::Box(min_enclosing_box(&m.foreground())?))))
                        .collect::<Result<_>>()?,
                ),
                State::Components(cs) => State::Geometry(
                    cs.iter()
                        .flat_map(|(c, cc)| cc.components.iter().map(move |k| (*c, Shape::Box(k.bbox))))
                        .collect(),
                ),
                _ => unreachable!(),
            },
            PostOp::FilterSmallBoxes { min_area_fraction } => {
                let State::Geometry(shapes) = state else { unreachable!() };
                let min_area = min_area_fraction * (w * h) as f64;
                State::Geometry(
                    shapes
                        .into_iter()
                        .filter(|(_, s)| match s {
                            Shape::Box(b) => b.area() as f64 >= min_area,
                            _ => true,
                        })
                        .collect(),
                )
            }
            PostOp::EnforceEnclosure { inner, outer } => {
                let State::Geometry(shapes) = state else { unreachable!() };
                State::Geometry(enforce(shapes, index(inner), index(outer)))
            }
        };
        if let State::Masks(ms) = &state {
            out.masks = ms.clone();
        }
    }
    if let State::Geometry(shapes) = state {
        out.shapes = shapes;
    }
    Ok(out)
}
