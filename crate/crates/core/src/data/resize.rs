use super::classmap::Labels;
use super::image::FloatImage;
use crate::error::{Error, Result};

/// Output size `(width, height)` for a pixel budget.
///
/// Images within budget keep their size. Larger ones are scaled by
/// `sqrt(budget / (w h))` with each side rounded to the nearest integer; if
/// rounding overshoots the budget, both sides are floored instead.
pub fn budget_size(width: usize, height: usize, budget: usize) -> Result<(usize, usize)> {
    if budget == 0 {
        return Err(Error::InvalidParam("pixel budget must be positive".into()));
    }
    if width * height <= budget {
        return Ok((width, height));
    }
    let s = (budget as f64 / (width * height) as f64).sqrt();
    let (fw, fh) = (width as f64 * s, height as f64 * s);
    let (w, h) = (fw.round() as usize, fh.round() as usize);
    let (w, h) = if w * h <= budget { (w, h) } else { (fw.floor() as usize, fh.floor() as usize) };
    // Very elongated images can floor a side to zero; keep it at one pixel
    // and shorten the other side so the budget still holds.
    let w = w.max(1).min(budget);
    let h = h.max(1).min(budget / w);
    Ok((w, h))
}

/// Resizes an image (bilinear) and optional labels (nearest) to the budget.
pub fn resize_to_pixel_budget(
    image: &FloatImage,
    labels: Option<&Labels>,
    budget: usize,
) -> Result<(FloatImage, Option<Labels>)> {
    let (w, h) = budget_size(image.width(), image.height(), budget)?;
    if let Some(l) = labels {
        if (l.width(), l.height()) != (image.width(), image.height()) {
            return Err(Error::Shape(format!(
                "labels are {}x{}, image is {}x{}",
                l.width(),
                l.height(),
                image.width(),
                image.height()
            )));
        }
    }
    Ok((image.resize_bilinear(w, h), labels.map(|l| l.resize_nearest(w, h))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_examples() {
        assert_eq!(budget_size(2000, 1500, 600_000).unwrap(), (894, 671));
        assert_eq!(budget_size(100, 100, 600_000).unwrap(), (100, 100));
        assert_eq!(budget_size(2000, 2000, 1_000_000).unwrap(), (1000, 1000));
        assert!(budget_size(10, 10, 0).is_err());
        assert_eq!(budget_size(3000, 1, 1000).unwrap(), (1000, 1));
        assert_eq!(budget_size(1, 10_000_000, 100).unwrap(), (1, 100));
    }

    #[test]
    fn resize_applies_to_labels() {
        let img = FloatImage::new(40, 20, 3);
        let l = Labels::uniform(40, 20, 2, 1);
        let (i, l) = resize_to_pixel_budget(&img, Some(&l), 200).unwrap();
        assert_eq!((i.width(), i.height()), (20, 10));
        assert_eq!(l.unwrap().bits.data().len(), 200);
    }
}
