//! On-disk datasets: `images/` and `labels/` directories paired by file stem.
//!
//! Labels are colour PNGs (decoded through a [`ClassMap`]) or, for line
//! tasks, JSON baseline lists. An optional `manifest.txt` lists the stems
//! to use, one per line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::baselines::{load_baselines, render_baselines};
use super::classmap::{encode_mask, ClassMap, Labels};
use super::image::FloatImage;
use super::resize::resize_to_pixel_budget;
use crate::error::{Error, Result};

/// Image file extensions picked up when scanning directories.
pub const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelSource {
    Color(PathBuf),
    Baselines(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetItem {
    pub stem: String,
    pub image: PathBuf,
    pub label: Option<LabelSource>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub items: Vec<DatasetItem>,
}

fn files_by_stem(dir: &Path, extensions: &[&str]) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        let stem = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned);
        if let (Some(ext), Some(stem)) = (ext, stem) {
            if extensions.contains(&ext.as_str()) {
                out.insert(stem, path);
            }
        }
    }
    Ok(out)
}

impl Dataset {
    /// Scans `root/images` and `root/labels`.
    ///
    /// With `require_labels`, every image needs a label file.
    pub fn discover(root: impl AsRef<Path>, require_labels: bool) -> Result<Self> {
        let root = root.as_ref();
        let images = files_by_stem(&root.join("images"), IMAGE_EXTENSIONS)?;
        if images.is_empty() {
            return Err(Error::Dataset(format!("no images under {}", root.join("images").display())));
        }
        let colors = files_by_stem(&root.join("labels"), &["png"])?;
        let lines = files_by_stem(&root.join("labels"), &["json"])?;
        let manifest = root.join("manifest.txt");
        let stems: Vec<String> = if manifest.is_file() {
            std::fs::read_to_string(&manifest)
                .map_err(|e| Error::io(&manifest, e))?
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_owned)
                .collect()
        } else {
            images.keys().cloned().collect()
        };
        let mut items = Vec::with_capacity(stems.len());
        for stem in stems {
            let image = images
                .get(&stem)
                .ok_or_else(|| Error::Dataset(format!("no image for stem {stem:?}")))?
                .clone();
            let label = match (colors.get(&stem), lines.get(&stem)) {
                (Some(p), _) => Some(LabelSource::Color(p.clone())),
                (None, Some(p)) => Some(LabelSource::Baselines(p.clone())),
                (None, None) if require_labels => {
                    return Err(Error::Dataset(format!("no label for image {}", image.display())))
                }
                (None, None) => None,
            };
            items.push(DatasetItem { stem, image, label });
        }
        Ok(Dataset { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Reads an item's labels at full image resolution.
pub fn load_labels(
    source: &LabelSource,
    classmap: &ClassMap,
    width: usize,
    height: usize,
    baseline_radius: u32,
) -> Result<Labels> {
    let labels = match source {
        LabelSource::Color(path) => {
            let img = image::open(path).map_err(|e| Error::image(path, e))?.to_rgb8();
            encode_mask(&img, classmap).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?
        }
        LabelSource::Baselines(path) => {
            if classmap.len() != 2 {
                return Err(Error::Dataset(format!(
                    "{}: baseline labels need a two-class map",
                    path.display()
                )));
            }
            Labels::from_mask(&render_baselines(&load_baselines(path)?, width, height, baseline_radius))
        }
    };
    if (labels.width(), labels.height()) != (width, height) {
        return Err(Error::Dataset(format!(
            "labels are {}x{} but the image is {width}x{height}",
            labels.width(),
            labels.height()
        )));
    }
    Ok(labels)
}

/// An image and its labels after resizing, ready for patching/augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub stem: String,
    pub image: FloatImage,
    pub labels: Labels,
}

/// Loads, labels and resizes every item. `budget = None` keeps sizes.
pub fn load_samples(
    dataset: &Dataset,
    classmap: &ClassMap,
    budget: Option<usize>,
    baseline_radius: u32,
) -> Result<Vec<Sample>> {
    dataset
        .items
        .iter()
        .map(|item| {
            let image = FloatImage::load(&item.image)?;
            let source = item
                .label
                .as_ref()
                .ok_or_else(|| Error::Dataset(format!("{} has no labels", item.image.display())))?;
            let labels = load_labels(source, classmap, image.width(), image.height(), baseline_radius)?;
            let (image, labels) = match budget {
                Some(b) => {
                    let (i, l) = resize_to_pixel_budget(&image, Some(&labels), b)?;
                    (i, l.expect("labels passed"))
                }
                None => (image, labels),
            };
            Ok(Sample {
                stem: item.stem.clone(),
                image,
                labels,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{Rgb, RgbImage};

    #[test]
    fn discovers_pairs_and_loads_them() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("images")).unwrap();
        std::fs::create_dir_all(dir.path().join("labels")).unwrap();
        RgbImage::from_pixel(8, 6, Rgb([200, 10, 10])).save(dir.path().join("images/a.png")).unwrap();
        RgbImage::from_pixel(8, 6, Rgb([255, 0, 0])).save(dir.path().join("labels/a.png")).unwrap();
        RgbImage::from_pixel(20, 10, Rgb([1, 2, 3])).save(dir.path().join("images/b.png")).unwrap();
        std::fs::write(dir.path().join("labels/b.json"), "[[[0, 5], [19, 5]]]").unwrap();

        let ds = Dataset::discover(dir.path(), true).unwrap();
        assert_eq!(ds.len(), 2);
        assert!(matches!(ds.items[1].label, Some(LabelSource::Baselines(_))));

        let map = ClassMap::exclusive([("background", [0, 0, 0]), ("page", [255, 0, 0])]).unwrap();
        let samples = load_samples(&ds, &map, Some(100), 1).unwrap();
        assert_eq!(samples[0].labels.class_at(3, 3), Some(1));
        assert!(samples[1].image.width() * samples[1].image.height() <= 100);
    }

    #[test]
    fn missing_labels_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("images")).unwrap();
        RgbImage::new(4, 4).save(dir.path().join("images/x.png")).unwrap();
        assert!(Dataset::discover(dir.path(), true).is_err());
        assert_eq!(Dataset::discover(dir.path(), false).unwrap().items[0].label, None);
    }
}
