//! Connected-component labelling (two-pass, union-find).

use serde::{Deserialize, Serialize};

use super::geometry::AxisAlignedBox;
use super::grid::{BinaryMask, Grid, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    pub fn from_neighbours(n: u8) -> Option<Self> {
        match n {
            4 => Some(Connectivity::Four),
            8 => Some(Connectivity::Eight),
            _ => None,
        }
    }

    /// Already-visited neighbours in raster order.
    fn causal_offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1)],
            Connectivity::Eight => &[(-1, 0), (-1, -1), (0, -1), (1, -1)],
        }
    }

    pub fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(-1, 0), (1, 0), (0, -1), (0, 1)],
            Connectivity::Eight => &[(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub label: u32,
    pub size: usize,
    pub bbox: AxisAlignedBox,
}

/// Label map (0 = background, components numbered `1..=K` in raster order
/// of their first pixel) plus per-component statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub labels: LabelMap,
    pub components: Vec<Component>,
}

impl Components {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn get(&self, label: u32) -> Option<&Component> {
        label.checked_sub(1).and_then(|i| self.components.get(i as usize))
    }

    pub fn mask_of(&self, label: u32) -> BinaryMask {
        self.labels.map(|&l| l == label)
    }

    /// Pixel coordinates of each component, indexed by `label - 1`.
    pub fn pixel_lists(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out: Vec<Vec<(usize, usize)>> = self.components.iter().map(|c| Vec::with_capacity(c.size)).collect();
        let w = self.labels.width();
        for (i, &l) in self.labels.data().iter().enumerate() {
            if l > 0 {
                out[l as usize - 1].push((i % w, i / w));
            }
        }
        out
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let next = parent[x as usize];
        parent[x as usize] = parent[next as usize];
        x = next;
    }
    x
}

pub fn label_components(mask: &BinaryMask, connectivity: Connectivity) -> Components {
    let (w, h) = mask.dims();
    let mut provisional = vec![0u32; w * h];
    let mut parent: Vec<u32> = vec![0];
    for y in 0..h {
        for x in 0..w {
            if !*mask.get(x, y) {
                continue;
            }
            let mut label = 0u32;
            for &(dx, dy) in connectivity.causal_offsets() {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx as usize >= w {
                    continue;
                }
                let n = provisional[ny as usize * w + nx as usize];
                if n == 0 {
                    continue;
                }
                if label == 0 {
                    label = n;
                } else {
                    let (a, b) = (find(&mut parent, label), find(&mut parent, n));
                    if a != b {
                        let (lo, hi) = (a.min(b), a.max(b));
                        parent[hi as usize] = lo;
                    }
                }
            }
            if label == 0 {
                label = parent.len() as u32;
                parent.push(label);
            }
            provisional[y * w + x] = label;
        }
    }

    // Roots are always the smallest provisional label of their set, and
    // provisional labels grow in raster order, so numbering roots in order
    // numbers components by their first pixel.
    let mut remap = vec![0u32; parent.len()];
    let mut next = 0u32;
    for l in 1..parent.len() as u32 {
        let root = find(&mut parent, l);
        if root == l {
            next += 1;
            remap[l as usize] = next;
        } else {
            remap[l as usize] = remap[root as usize];
        }
    }

    let mut components: Vec<Component> = (1..=next)
        .map(|label| Component {
            label,
            size: 0,
            bbox: AxisAlignedBox {
                x_min: i64::MAX,
                y_min: i64::MAX,
                x_max: i64::MIN,
                y_max: i64::MIN,
            },
        })
        .collect();
    let mut labels = Vec::with_capacity(w * h);
    for (i, &p) in provisional.iter().enumerate() {
        let l = remap[p as usize];
        labels.push(l);
        if l > 0 {
            let c = &mut components[l as usize - 1];
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            c.size += 1;
            c.bbox.x_min = c.bbox.x_min.min(x);
            c.bbox.y_min = c.bbox.y_min.min(y);
            c.bbox.x_max = c.bbox.x_max.max(x + 1);
            c.bbox.y_max = c.bbox.y_max.max(y + 1);
        }
    }
    Components {
        labels: Grid::from_vec(w, h, labels).expect("same dims"),
        components,
    }
}

/// Keeps components with at least `min_size` pixels.
pub fn filter_small_components(cc: &Components, min_size: usize) -> BinaryMask {
    let keep: Vec<bool> = std::iter::once(false)
        .chain(cc.components.iter().map(|c| c.size >= min_size))
        .collect();
    cc.labels.map(|&l| keep[l as usize])
}

/// Mask of the biggest component (lowest label on ties); empty if none.
pub fn largest_component(cc: &Components) -> BinaryMask {
    let best = cc
        .components
        .iter()
        .fold(None::<&Component>, |best, c| match best {
            Some(b) if b.size >= c.size => Some(b),
            _ => Some(c),
        })
        .map_or(0, |c| c.label);
    cc.labels.map(|&l| best > 0 && l == best)
}
