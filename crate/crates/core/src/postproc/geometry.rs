//! Shape vectorisation: quadrilaterals, enclosing boxes and polylines.
//!
//! Points are `[x, y]` in pixel units with pixel centres on integers.

use serde::{Deserialize, Serialize};

use super::grid::{BinaryMask, Grid};
use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Twice the signed area; positive for clockwise order in image coordinates
/// (y pointing down).
pub fn signed_area2(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum()
}

pub fn polygon_area(poly: &[Point]) -> f64 {
    signed_area2(poly).abs() / 2.0
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Four corners: top-left, top-right, bottom-right, bottom-left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[Point; 4]", into = "[Point; 4]")]
pub struct Quad {
    corners: [Point; 4],
}

impl Quad {
    /// Rejects zero-area and self-intersecting corner lists.
    pub fn new(corners: [Point; 4]) -> Result<Self> {
        if corners.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("quad has non-finite corners".into()));
        }
        if polygon_area(&corners) <= 0.0 {
            return Err(Error::Degenerate(format!("quad {corners:?} has zero area")));
        }
        let [a, b, c, d] = corners;
        if segments_cross(a, b, c, d) || segments_cross(b, c, d, a) {
            return Err(Error::Degenerate(format!("quad {corners:?} is self-intersecting")));
        }
        Ok(Quad { corners })
    }

    pub fn corners(&self) -> &[Point; 4] {
        &self.corners
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.corners)
    }

    pub fn scaled(&self, sx: f64, sy: f64) -> Result<Self> {
        Quad::new(self.corners.map(|[x, y]| [x * sx, y * sy]))
    }

    /// Pixels whose centres lie inside or on the quad.
    pub fn rasterize(&self, width: usize, height: usize) -> BinaryMask {
        let c = &self.corners;
        let sign = signed_area2(c).signum();
        let eps = 1e-9;
        Grid::from_fn(width, height, |x, y| {
            let p = [x as f64, y as f64];
            (0..4).all(|i| sign * cross(c[i], c[(i + 1) % 4], p) >= -eps)
        })
    }
}

impl TryFrom<[Point; 4]> for Quad {
    type Error = Error;
    fn try_from(c: [Point; 4]) -> Result<Self> {
        Quad::new(c)
    }
}

impl From<Quad> for [Point; 4] {
    fn from(q: Quad) -> Self {
        q.corners
    }
}

/// Half-open pixel box `[x_min, x_max) × [y_min, y_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[i64; 4]", into = "[i64; 4]")]
pub struct AxisAlignedBox {
    pub x_min: i64,
    pub y_min: i64,
    pub x_max: i64,
    pub y_max: i64,
}

impl From<[i64; 4]> for AxisAlignedBox {
    fn from([x_min, y_min, x_max, y_max]: [i64; 4]) -> Self {
        AxisAlignedBox { x_min, y_min, x_max, y_max }
    }
}

impl From<AxisAlignedBox> for [i64; 4] {
    fn from(b: AxisAlignedBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

impl AxisAlignedBox {
    pub fn new(x_min: i64, y_min: i64, x_max: i64, y_max: i64) -> Result<Self> {
        if x_min >= x_max || y_min >= y_max {
            return Err(Error::Degenerate(format!(
                "box ({x_min}, {y_min}, {x_max}, {y_max}) is empty"
            )));
        }
        Ok(AxisAlignedBox { x_min, y_min, x_max, y_max })
    }

    pub fn is_valid(&self) -> bool {
        self.x_min < self.x_max && self.y_min < self.y_max
    }

    pub fn width(&self) -> i64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> i64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> i64 {
        if self.is_valid() {
            self.width() * self.height()
        } else {
            0
        }
    }

    pub fn intersection(&self, other: &Self) -> Option<Self> {
        let b = AxisAlignedBox {
            x_min: self.x_min.max(other.x_min),
            y_min: self.y_min.max(other.y_min),
            x_max: self.x_max.min(other.x_max),
            y_max: self.y_max.min(other.y_max),
        };
        b.is_valid().then_some(b)
    }

    /// Maps to another resolution, growing outward to whole pixels.
    pub fn scaled(&self, sx: f64, sy: f64) -> Self {
        AxisAlignedBox {
            x_min: (self.x_min as f64 * sx).floor() as i64,
            y_min: (self.y_min as f64 * sy).floor() as i64,
            x_max: (self.x_max as f64 * sx).ceil() as i64,
            y_max: (self.y_max as f64 * sy).ceil() as i64,
        }
    }

    pub fn corners(&self) -> [Point; 4] {
        let (x0, y0, x1, y1) = (self.x_min as f64, self.y_min as f64, self.x_max as f64, self.y_max as f64);
        [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]
    }

    pub fn rasterize(&self, width: usize, height: usize) -> BinaryMask {
        Grid::from_fn(width, height, |x, y| {
            let (x, y) = (x as i64, y as i64);
            x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
        })
    }
}

/// Ordered vertices; at least two, consecutive ones distinct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct PolyLine {
    vertices: Vec<Point>,
}

impl PolyLine {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::Degenerate(format!("polyline needs 2 vertices, got {}", vertices.len())));
        }
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Degenerate("polyline repeats a vertex".into()));
        }
        Ok(PolyLine { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn scaled(&self, sx: f64, sy: f64) -> Result<Self> {
        PolyLine::new(self.vertices.iter().map(|&[x, y]| [x * sx, y * sy]).collect())
    }

    /// Distance from `p` to the nearest segment.
    pub fn distance_to(&self, p: Point) -> f64 {
        self.vertices
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }
}

impl TryFrom<Vec<Point>> for PolyLine {
    type Error = Error;
    fn try_from(v: Vec<Point>) -> Result<Self> {
        PolyLine::new(v)
    }
}

impl From<PolyLine> for Vec<Point> {
    fn from(p: PolyLine) -> Self {
        p.vertices
    }
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a[0] + t * dx, a[1] + t * dy);
    ((p[0] - qx).powi(2) + (p[1] - qy).powi(2)).sqrt()
}

/// Corner points of the foreground: maximisers of `-x-y`, `x-y`, `x+y` and
/// `-x+y`, ties broken by smaller `y` then smaller `x`.
pub fn extract_extreme_quad(mask: &BinaryMask) -> Result<Quad> {
    let scores: [fn(i64, i64) -> i64; 4] = [|x, y| -x - y, |x, y| x - y, |x, y| x + y, |x, y| -x + y];
    let mut best: [Option<(i64, i64, i64)>; 4] = [None; 4];
    // Raster order visits smaller y, then smaller x, first; strict `>` keeps
    // the first maximiser.
    for (x, y) in mask.foreground() {
        let (x, y) = (x as i64, y as i64);
        for (slot, score) in best.iter_mut().zip(scores) {
            let s = score(x, y);
            if slot.is_none_or(|(b, _, _)| s > b) {
                *slot = Some((s, x, y));
            }
        }
    }
    if best[0].is_none() {
        return Err(Error::Empty("no foreground pixels to fit a quad".into()));
    }
    Quad::new(best.map(|b| {
        let (_, x, y) = b.expect("non-empty");
        [x as f64, y as f64]
    }))
}

/// Tight half-open box around a pixel set.
pub fn min_enclosing_box(pixels: &[(usize, usize)]) -> Result<AxisAlignedBox> {
    if pixels.is_empty() {
        return Err(Error::Empty("no pixels to enclose".into()));
    }
    let mut b = AxisAlignedBox {
        x_min: i64::MAX,
        y_min: i64::MAX,
        x_max: i64::MIN,
        y_max: i64::MIN,
    };
    for &(x, y) in pixels {
        let (x, y) = (x as i64, y as i64);
        b.x_min = b.x_min.min(x);
        b.y_min = b.y_min.min(y);
        b.x_max = b.x_max.max(x + 1);
        b.y_max = b.y_max.max(y + 1);
    }
    Ok(b)
}

/// Default path-reduction tolerance in pixels.
pub const DEFAULT_POLYLINE_EPSILON: f64 = 2.0;

/// Column-centroid path along the longer bounding-box axis.
pub fn dense_centerline(pixels: &[(usize, usize)]) -> Result<Vec<Point>> {
    let b = min_enclosing_box(pixels)?;
    let horizontal = b.width() >= b.height();
    let span = if horizontal { b.width() } else { b.height() } as usize;
    let origin = if horizontal { b.x_min } else { b.y_min } as usize;
    let mut sums = vec![(0usize, 0usize); span];
    for &(x, y) in pixels {
        let (major, minor) = if horizontal { (x, y) } else { (y, x) };
        let s = &mut sums[major - origin];
        s.0 += 1;
        s.1 += minor;
    }
    Ok(sums
        .iter()
        .enumerate()
        .filter(|(_, s)| s.0 > 0)
        .map(|(i, s)| {
            let major = (origin + i) as f64;
            let minor = s.1 as f64 / s.0 as f64;
            if horizontal {
                [major, minor]
            } else {
                [minor, major]
            }
        })
        .collect())
}

/// Ramer–Douglas–Peucker reduction; every input point ends within
/// `epsilon` of the result. Endpoints are always kept.
pub fn simplify_path(points: &[Point], epsilon: f64) -> Vec<Point> {
    if points.len() <= 2 {
        return points.to_vec();
    }
    let mut keep = vec![false; points.len()];
    keep[0] = true;
    keep[points.len() - 1] = true;
    let mut stack = vec![(0, points.len() - 1)];
    while let Some((a, b)) = stack.pop() {
        let (mut far, mut dmax) = (a, 0.0);
        for i in a + 1..b {
            let d = point_segment_distance(points[i], points[a], points[b]);
            if d > dmax {
                far = i;
                dmax = d;
            }
        }
        if dmax > epsilon {
            keep[far] = true;
            stack.push((a, far));
            stack.push((far, b));
        }
    }
    points.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect()
}

/// Polyline through a line-like component; `epsilon = 0` keeps the dense path.
pub fn vectorize_polyline(pixels: &[(usize, usize)], epsilon: f64) -> Result<PolyLine> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParam(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let dense = dense_centerline(pixels)?;
    let path = if epsilon == 0.0 { dense } else { simplify_path(&dense, epsilon) };
    PolyLine::new(path)
}

/// Keeps boxes covering at least `min_area_fraction` of the image.
pub fn filter_small_boxes(
    boxes: &[AxisAlignedBox],
    image_size: (usize, usize),
    min_area_fraction: f64,
) -> Vec<AxisAlignedBox> {
    let min_area = min_area_fraction * (image_size.0 * image_size.1) as f64;
    boxes.iter().filter(|b| b.area() as f64 >= min_area).copied().collect()
}

/// Clips `inner` to `outer`; disjoint boxes are an error.
pub fn enforce_enclosure(inner: &AxisAlignedBox, outer: &AxisAlignedBox) -> Result<AxisAlignedBox> {
    inner
        .intersection(outer)
        .ok_or_else(|| Error::Degenerate(format!("box {inner:?} lies outside {outer:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x0: usize, y0: usize, x1: usize, y1: usize, w: usize, h: usize) -> BinaryMask {
        Grid::from_fn(w, h, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1)
    }

    #[test]
    fn rectangle_quad_is_its_corners() {
        let q = extract_extreme_quad(&rect(3, 4, 10, 9, 16, 16)).unwrap();
        assert_eq!(q.corners(), &[[3.0, 4.0], [9.0, 4.0], [9.0, 8.0], [3.0, 8.0]]);
    }

    #[test]
    fn single_pixel_quad_is_degenerate() {
        assert!(matches!(extract_extreme_quad(&rect(2, 2, 3, 3, 5, 5)), Err(Error::Degenerate(_))));
        assert!(matches!(extract_extreme_quad(&Grid::new(3, 3, false)), Err(Error::Empty(_))));
    }

    #[test]
    fn quad_rasterisation_includes_boundary_centres() {
        let q = Quad::new([[1.0, 1.0], [3.0, 1.0], [3.0, 2.0], [1.0, 2.0]]).unwrap();
        assert_eq!(q.rasterize(5, 4).count(), 6);
    }

    #[test]
    fn bow_tie_is_rejected() {
        assert!(Quad::new([[0.0, 0.0], [4.0, 4.0], [4.0, 0.0], [0.0, 4.0]]).is_err());
    }

    #[test]
    fn box_conventions() {
        assert_eq!(min_enclosing_box(&[(3, 7)]).unwrap(), AxisAlignedBox::new(3, 7, 4, 8).unwrap());
        let l: Vec<(usize, usize)> = (0..=20).map(|y| (0, y)).chain((0..=10).map(|x| (x, 20))).collect();
        assert_eq!(min_enclosing_box(&l).unwrap(), AxisAlignedBox::new(0, 0, 11, 21).unwrap());
        assert!(min_enclosing_box(&[]).is_err());
    }

    #[test]
    fn small_box_filter_uses_image_fraction() {
        let small = AxisAlignedBox::new(0, 0, 70, 70).unwrap();
        let ok = AxisAlignedBox::new(0, 0, 71, 71).unwrap();
        assert_eq!(filter_small_boxes(&[small, ok], (1000, 1000), 0.005), vec![ok]);
        assert_eq!(filter_small_boxes(&[small, ok], (1000, 1000), 0.0).len(), 2);
    }

    #[test]
    fn enclosure_clips_or_fails() {
        let outer = AxisAlignedBox::new(0, 0, 100, 100).unwrap();
        let inside = AxisAlignedBox::new(10, 10, 50, 50).unwrap();
        assert_eq!(enforce_enclosure(&inside, &outer).unwrap(), inside);
        let wide = AxisAlignedBox::new(10, 10, 110, 50).unwrap();
        assert_eq!(enforce_enclosure(&wide, &outer).unwrap().x_max, 100);
        assert!(enforce_enclosure(&AxisAlignedBox::new(200, 0, 300, 10).unwrap(), &outer).is_err());
    }

    #[test]
    fn horizontal_band_becomes_two_vertices() {
        let px: Vec<(usize, usize)> = (10..90).flat_map(|x| (45..=55).map(move |y| (x, y))).collect();
        let line = vectorize_polyline(&px, DEFAULT_POLYLINE_EPSILON).unwrap();
        assert_eq!(line.vertices(), &[[10.0, 50.0], [89.0, 50.0]]);
        assert_eq!(vectorize_polyline(&px, 0.0).unwrap().len(), 80);
    }

    #[test]
    fn vertical_components_follow_rows() {
        let px: Vec<(usize, usize)> = (0..30).flat_map(|y| [(4, y), (5, y)]).collect();
        let line = vectorize_polyline(&px, 1.0).unwrap();
        assert_eq!(line.vertices(), &[[4.5, 0.0], [4.5, 29.0]]);
    }

    #[test]
    fn serde_shapes() {
        let b = AxisAlignedBox::new(1, 2, 3, 4).unwrap();
        assert_eq!(serde_json::to_string(&b).unwrap(), "[1,2,3,4]");
        let q: Quad = serde_json::from_str("[[0,0],[2,0],[2,2],[0,2]]").unwrap();
        assert_eq!(q.area(), 4.0);
        assert!(serde_json::from_str::<PolyLine>("[[0,0]]").is_err());
    }
}
