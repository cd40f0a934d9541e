//! Prediction outputs: geometry JSON documents and full-resolution masks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chain::ChainOutput;
use crate::error::{Error, Result};
use crate::postproc::{AxisAlignedBox, BinaryMask, Grid, Point, PolyLine, Quad};

/// JSON Schema (draft 2020-12) for [`GeometryFile`] documents.
pub const GEOMETRY_SCHEMA: &str = include_str!("../../schema/geometry.schema.json");

/// A vectorised result: `{"quad": [[x,y]×4]}`, `{"box": [x_min,y_min,x_max,y_max]}`
/// or `{"polyline": [[x,y], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Quad(Quad),
    Box(AxisAlignedBox),
    Polyline(PolyLine),
}

impl Shape {
    /// Whether the shape encloses an area (quads and boxes).
    pub fn is_region(&self) -> bool {
        !matches!(self, Shape::Polyline(_))
    }

    pub fn rasterize(&self, width: usize, height: usize) -> Option<BinaryMask> {
        match self {
            Shape::Quad(q) => Some(q.rasterize(width, height)),
            Shape::Box(b) => Some(b.rasterize(width, height)),
            Shape::Polyline(_) => None,
        }
    }

    /// Maps from a `from` = (w, h) raster to a `to` raster. Vertex
    /// coordinates are pixel centres; box edges are pixel boundaries.
    pub fn rescaled(&self, from: (usize, usize), to: (usize, usize)) -> Result<Shape> {
        if from == to {
            return Ok(self.clone());
        }
        let sx = to.0 as f64 / from.0 as f64;
        let sy = to.1 as f64 / from.1 as f64;
        let pt = |p: &Point| [(p[0] + 0.5) * sx - 0.5, (p[1] + 0.5) * sy - 0.5];
        Ok(match self {
            Shape::Quad(q) => Shape::Quad(Quad::new(q.corners().map(|p| pt(&p)))?),
            Shape::Box(b) => {
                let s = b.scaled(sx, sy);
                Shape::Box(AxisAlignedBox::new(
                    s.x_min.max(0),
                    s.y_min.max(0),
                    s.x_max.min(to.0 as i64),
                    s.y_max.min(to.1 as i64),
                )?)
            }
            Shape::Polyline(l) => Shape::Polyline(PolyLine::new(l.vertices().iter().map(pt).collect())?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeRecord {
    pub class: String,
    #[serde(flatten)]
    pub shape: Shape,
}

/// Per-image geometry, in original-image pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryFile {
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub task: String,
    pub shapes: Vec<ShapeRecord>,
}

impl GeometryFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn boxes_of(&self, class: &str) -> Vec<AxisAlignedBox> {
        self.shapes
            .iter()
            .filter_map(|r| match &r.shape {
                Shape::Box(b) if r.class == class => Some(*b),
                _ => None,
            })
            .collect()
    }
}

/// Nearest-neighbour resampling of a mask.
pub fn resize_mask(mask: &BinaryMask, width: usize, height: usize) -> BinaryMask {
    let (w, h) = mask.dims();
    if (w, h) == (width, height) {
        return mask.clone();
    }
    Grid::from_fn(width, height, |x, y| {
        let sx = (((x as f64 + 0.5) * w as f64 / width as f64) as usize).min(w - 1);
        let sy = (((y as f64 + 0.5) * h as f64 / height as f64) as usize).min(h - 1);
        *mask.get(sx, sy)
    })
}

/// A post-processed prediction mapped back to the original resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub geometry: GeometryFile,
    /// One mask per target class: the rasterised region shapes when the
    /// chain produced any, otherwise the chain's last mask.
    pub masks: Vec<(String, BinaryMask)>,
}

impl Prediction {
    /// Scales `out` (computed on a `working` = (w, h) raster) to
    /// `original` size.
    pub fn from_chain(
        out: &ChainOutput,
        image: &str,
        task: &str,
        class_names: &[String],
        targets: &[usize],
        working: (usize, usize),
        original: (usize, usize),
    ) -> Result<Self> {
        let shapes = out
            .shapes
            .iter()
            .map(|(c, s)| {
                Ok(ShapeRecord {
                    class: class_names[*c].clone(),
                    shape: s.rescaled(working, original)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (ow, oh) = original;
        let masks = targets
            .iter()
            .map(|&c| {
                let name = &class_names[c];
                let regions: Vec<BinaryMask> = shapes
                    .iter()
                    .filter(|r| &r.class == name)
                    .filter_map(|r| r.shape.rasterize(ow, oh))
                    .collect();
                let has_regions = out.shapes.iter().any(|(k, s)| *k == c && s.is_region());
                let mask = if has_regions {
                    regions.iter().try_fold(Grid::new(ow, oh, false), |acc, m| acc.or(m))?
                } else if let Some((_, m)) = out.masks.iter().find(|(k, _)| *k == c) {
                    resize_mask(m, ow, oh)
                } else {
                    Grid::new(ow, oh, false)
                };
                Ok((name.clone(), mask))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Prediction {
            geometry: GeometryFile {
                image: image.into(),
                width: ow,
                height: oh,
                task: task.into(),
                shapes,
            },
            masks,
        })
    }

    /// Writes `<stem>.json` and `<stem>_<class>.png` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        self.geometry.save(dir.join(format!("{stem}.json")))?;
        for (class, mask) in &self.masks {
            let p = dir.join(mask_file_name(stem, class));
            mask.to_gray().save(&p).map_err(|e| Error::image(&p, e))?;
        }
        Ok(())
    }
}

pub fn mask_file_name(stem: &str, class: &str) -> String {
    format!("{stem}_{class}.png")
}
