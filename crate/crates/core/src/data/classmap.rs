//! Colour-coded annotations ↔ per-pixel class labels.

use std::collections::HashMap;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::postproc::{BinaryMask, Grid, LabelMap};
use crate::tensor::Tensor;

/// Largest number of classes a label bit set can hold.
pub const MAX_CLASSES: usize = 63;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub name: String,
    pub color: [u8; 3],
}

/// A colour standing for several classes at once (multi-label mode only).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositeColor {
    pub color: [u8; 3],
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassMap {
    pub classes: Vec<ClassEntry>,
    #[serde(default)]
    pub multilabel: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub composites: Vec<CompositeColor>,
    /// Pixels of this colour are excluded from the loss.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ignore_color: Option<[u8; 3]>,
}

impl ClassMap {
    /// Exclusive map from `(name, colour)` pairs.
    pub fn exclusive<S: Into<String>>(entries: impl IntoIterator<Item = (S, [u8; 3])>) -> Result<Self> {
        let map = ClassMap {
            classes: entries
                .into_iter()
                .map(|(name, color)| ClassEntry { name: name.into(), color })
                .collect(),
            multilabel: false,
            composites: Vec::new(),
            ignore_color: None,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::ClassMap("no classes defined".into()));
        }
        if self.classes.len() > MAX_CLASSES {
            return Err(Error::ClassMap(format!("at most {MAX_CLASSES} classes supported")));
        }
        if !self.multilabel && !self.composites.is_empty() {
            return Err(Error::ClassMap("composite colours need multilabel = true".into()));
        }
        let mut colors: HashMap<[u8; 3], String> = HashMap::new();
        let mut check = |color: [u8; 3], what: String| -> Result<()> {
            if let Some(prev) = colors.insert(color, what.clone()) {
                return Err(Error::ClassMap(format!("colour {color:?} used by both {prev} and {what}")));
            }
            Ok(())
        };
        for (i, c) in self.classes.iter().enumerate() {
            if self.classes[..i].iter().any(|p| p.name == c.name) {
                return Err(Error::ClassMap(format!("duplicate class name {:?}", c.name)));
            }
            check(c.color, format!("class {:?}", c.name))?;
        }
        for comp in &self.composites {
            check(comp.color, format!("composite {:?}", comp.classes))?;
            for name in &comp.classes {
                self.index_of(name)?;
            }
        }
        if let Some(c) = self.ignore_color {
            check(c, "the ignore colour".into())?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.classes.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::ClassMap(format!("unknown class {name:?}")))
    }

    /// Colour → class bit set.
    fn lookup(&self) -> HashMap<[u8; 3], u64> {
        let mut m: HashMap<[u8; 3], u64> = self.classes.iter().enumerate().map(|(i, c)| (c.color, 1u64 << i)).collect();
        for comp in &self.composites {
            let bits = comp
                .classes
                .iter()
                .filter_map(|n| self.index_of(n).ok())
                .fold(0u64, |b, i| b | (1 << i));
            m.insert(comp.color, bits);
        }
        if let Some(c) = self.ignore_color {
            m.insert(c, IGNORE);
        }
        m
    }
}

/// Label value of pixels excluded from the loss.
pub const IGNORE: u64 = u64::MAX;

/// Per-pixel class sets stored as bit masks (bit `k` = class `k`).
///
/// Exclusive maps have exactly one bit per labelled pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labels {
    pub n_classes: usize,
    pub multilabel: bool,
    pub bits: Grid<u64>,
}

impl Labels {
    /// Every pixel labelled with class `class`.
    pub fn uniform(width: usize, height: usize, n_classes: usize, class: usize) -> Self {
        Labels {
            n_classes,
            multilabel: false,
            bits: Grid::new(width, height, 1u64 << class),
        }
    }

    pub fn from_indices(indices: &LabelMap, n_classes: usize) -> Result<Self> {
        if let Some(&i) = indices.data().iter().find(|&&i| i as usize >= n_classes) {
            return Err(Error::ClassIndex {
                index: i,
                n_classes,
            });
        }
        Ok(Labels {
            n_classes,
            multilabel: false,
            bits: indices.map(|&i| 1u64 << i),
        })
    }

    /// Binary labels: class 1 where `mask` is set, class 0 elsewhere.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        Labels {
            n_classes: 2,
            multilabel: false,
            bits: mask.map(|&m| if m { 2 } else { 1 }),
        }
    }

    pub fn width(&self) -> usize {
        self.bits.width()
    }

    pub fn height(&self) -> usize {
        self.bits.height()
    }

    pub fn ignored(&self) -> usize {
        self.bits.data().iter().filter(|&&b| b == IGNORE).count()
    }

    /// Class index per pixel (lowest set bit); ignored pixels map to `None`.
    pub fn class_at(&self, x: usize, y: usize) -> Option<usize> {
        let b = *self.bits.get(x, y);
        (b != IGNORE && b != 0).then(|| b.trailing_zeros() as usize)
    }

    /// Exclusive index map; ignored pixels become class 0.
    pub fn indices(&self) -> LabelMap {
        self.bits.map(|&b| if b == IGNORE || b == 0 { 0 } else { b.trailing_zeros() })
    }

    /// Mask of pixels carrying class `k`.
    pub fn class_mask(&self, k: usize) -> BinaryMask {
        self.bits.map(|&b| b != IGNORE && b & (1 << k) != 0)
    }

    /// One-/multi-hot tensor `[1, h, w, n_classes]`; ignored pixels are all zero.
    pub fn to_tensor(&self) -> Tensor {
        let (w, h, c) = (self.width(), self.height(), self.n_classes);
        let mut data = vec![0.0; w * h * c];
        for (i, &b) in self.bits.data().iter().enumerate() {
            if b == IGNORE {
                continue;
            }
            for k in 0..c {
                if b & (1 << k) != 0 {
                    data[i * c + k] = 1.0;
                }
            }
        }
        Tensor::from_vec(&[1, h, w, c], data).expect("size")
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Self {
        Labels {
            n_classes: self.n_classes,
            multilabel: self.multilabel,
            bits: Grid::from_fn(width, height, |x, y| *self.bits.get(x0 + x, y0 + y)),
        }
    }

    /// Extends to `width × height` at the bottom/right with ignored pixels.
    pub fn pad_to(&self, width: usize, height: usize) -> Self {
        Labels {
            n_classes: self.n_classes,
            multilabel: self.multilabel,
            bits: Grid::from_fn(width, height, |x, y| {
                if x < self.width() && y < self.height() {
                    *self.bits.get(x, y)
                } else {
                    IGNORE
                }
            }),
        }
    }

    /// Nearest-neighbour resize (pixel-centre aligned).
    pub fn resize_nearest(&self, width: usize, height: usize) -> Self {
        let (sx, sy) = (self.width() as f64 / width as f64, self.height() as f64 / height as f64);
        Labels {
            n_classes: self.n_classes,
            multilabel: self.multilabel,
            bits: Grid::from_fn(width, height, |x, y| {
                let fx = (((x as f64 + 0.5) * sx).floor() as usize).min(self.width() - 1);
                let fy = (((y as f64 + 0.5) * sy).floor() as usize).min(self.height() - 1);
                *self.bits.get(fx, fy)
            }),
        }
    }
}

/// Converts a colour annotation into class labels.
///
/// Every colour must be registered; otherwise the most frequent unknown
/// colour is reported with its pixel count.
pub fn encode_mask(label_image: &RgbImage, classmap: &ClassMap) -> Result<Labels> {
    classmap.validate()?;
    let lookup = classmap.lookup();
    let mut unknown: HashMap<[u8; 3], usize> = HashMap::new();
    let (w, h) = (label_image.width() as usize, label_image.height() as usize);
    let mut bits = Vec::with_capacity(w * h);
    for px in label_image.pixels() {
        match lookup.get(&px.0) {
            Some(&b) => bits.push(b),
            None => {
                *unknown.entry(px.0).or_default() += 1;
                bits.push(0);
            }
        }
    }
    if let Some((&color, &count)) = unknown.iter().max_by_key(|(c, n)| (**n, std::cmp::Reverse(**c))) {
        return Err(Error::UnknownColor { color, count });
    }
    Ok(Labels {
        n_classes: classmap.len(),
        multilabel: classmap.multilabel,
        bits: Grid::from_vec(w, h, bits)?,
    })
}

/// Paints class indices with their class colours.
pub fn decode_mask(indices: &LabelMap, classmap: &ClassMap) -> Result<RgbImage> {
    let n = classmap.len();
    if let Some(&i) = indices.data().iter().find(|&&i| i as usize >= n) {
        return Err(Error::ClassIndex {
            index: i,
            n_classes: n,
        });
    }
    Ok(RgbImage::from_fn(indices.width() as u32, indices.height() as u32, |x, y| {
        Rgb(classmap.classes[*indices.get(x as usize, y as usize) as usize].color)
    }))
}

/// Paints label bit sets, using composite colours where registered.
pub fn decode_labels(labels: &Labels, classmap: &ClassMap) -> Result<RgbImage> {
    let reverse: HashMap<u64, [u8; 3]> = classmap.lookup().into_iter().map(|(c, b)| (b, c)).collect();
    let mut out = RgbImage::new(labels.width() as u32, labels.height() as u32);
    for (i, &b) in labels.bits.data().iter().enumerate() {
        let color = reverse
            .get(&b)
            .ok_or_else(|| Error::ClassMap(format!("no colour registered for class set {b:#b}")))?;
        out.put_pixel((i % labels.width()) as u32, (i / labels.width()) as u32, Rgb(*color));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two() -> ClassMap {
        ClassMap::exclusive([("background", [0, 0, 0]), ("page", [255, 0, 0])]).unwrap()
    }

    #[test]
    fn uniform_background_is_class_zero() {
        let img = RgbImage::from_pixel(4, 3, Rgb([0, 0, 0]));
        let l = encode_mask(&img, &two()).unwrap();
        let t = l.to_tensor();
        assert!(t.data().chunks(2).all(|c| c == [1.0, 0.0]));
    }

    #[test]
    fn unknown_colour_reports_colour_and_count() {
        let mut img = RgbImage::from_pixel(4, 3, Rgb([0, 0, 0]));
        img.put_pixel(1, 1, Rgb([9, 9, 9]));
        img.put_pixel(2, 1, Rgb([9, 9, 9]));
        match encode_mask(&img, &two()) {
            Err(Error::UnknownColor { color, count }) => {
                assert_eq!(color, [9, 9, 9]);
                assert_eq!(count, 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn checkerboard_round_trips() {
        let map = two();
        let img = RgbImage::from_fn(6, 5, |x, y| Rgb(map.classes[((x + y) % 2) as usize].color));
        let l = encode_mask(&img, &map).unwrap();
        assert_eq!(l.class_at(1, 0), Some(1));
        assert_eq!(decode_mask(&l.indices(), &map).unwrap(), img);
    }

    #[test]
    fn decode_rejects_out_of_range() {
        let idx = Grid::new(2, 2, 2u32);
        assert!(matches!(decode_mask(&idx, &two()), Err(Error::ClassIndex { index: 2, .. })));
    }

    #[test]
    fn validation_catches_duplicates() {
        assert!(ClassMap::exclusive([("a", [1, 2, 3]), ("b", [1, 2, 3])]).is_err());
        assert!(ClassMap::exclusive([("a", [1, 2, 3]), ("a", [1, 2, 4])]).is_err());
        assert!(ClassMap::exclusive(Vec::<(String, [u8; 3])>::new()).is_err());
    }

    #[test]
    fn composites_set_several_bits() {
        let map = ClassMap {
            classes: vec![
                ClassEntry { name: "text".into(), color: [0, 0, 8] },
                ClassEntry { name: "decoration".into(), color: [0, 0, 4] },
            ],
            multilabel: true,
            composites: vec![
                CompositeColor { color: [0, 0, 12], classes: vec!["text".into(), "decoration".into()] },
                CompositeColor { color: [0, 0, 1], classes: vec![] },
            ],
            ignore_color: None,
        };
        let img = RgbImage::from_fn(3, 1, |x, _| Rgb([[0, 0, 12], [0, 0, 1], [0, 0, 4]][x as usize]));
        let l = encode_mask(&img, &map).unwrap();
        assert_eq!(l.bits.data(), &[0b11, 0, 0b10]);
        assert_eq!(decode_labels(&l, &map).unwrap(), img);
    }

    #[test]
    fn ignore_colour_and_padding() {
        let mut map = two();
        map.ignore_color = Some([128, 128, 128]);
        let img = RgbImage::from_fn(2, 1, |x, _| if x == 0 { Rgb([128, 128, 128]) } else { Rgb([255, 0, 0]) });
        let l = encode_mask(&img, &map).unwrap();
        assert_eq!(l.ignored(), 1);
        assert_eq!(l.pad_to(3, 2).ignored(), 5);
        assert!(l.to_tensor().data()[..2].iter().all(|&v| v == 0.0));
    }
}
