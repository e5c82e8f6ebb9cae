//! Shared raster primitives: grayscale grids, binary masks, and the handful
//! of geometric measurements (centroid, bounding box, IoU) the pipeline
//! stages agree on.
//!
//! Grids are `ndarray::Array2` indexed `[row, col]`, i.e. `[y, x]`.

use ndarray::Array2;

/// Grayscale intensity grid, values in `[0, 1]`.
pub type Gray = Array2<f64>;

/// Binary mask grid, values exactly 0 or 1.
pub type Mask = Array2<u8>;

/// Inclusive bounding box of a mask's foreground, in `(x0, y0, x1, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }
}

/// Number of foreground pixels.
pub fn mask_area(mask: &Mask) -> usize {
    mask.iter().filter(|&&v| v != 0).count()
}

/// Foreground centroid as `(cx, cy)`, or `None` for an empty mask.
pub fn mask_centroid(mask: &Mask) -> Option<(f64, f64)> {
    let mut n = 0usize;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for ((y, x), &v) in mask.indexed_iter() {
        if v != 0 {
            n += 1;
            sx += x as f64;
            sy += y as f64;
        }
    }
    if n == 0 {
        None
    } else {
        Some((sx / n as f64, sy / n as f64))
    }
}

/// Tight foreground bounding box, or `None` for an empty mask.
pub fn mask_bbox(mask: &Mask) -> Option<BoundingBox> {
    let (h, w) = mask.dim();
    let (mut x0, mut y0, mut x1, mut y1) = (w, h, 0usize, 0usize);
    let mut any = false;
    for ((y, x), &v) in mask.indexed_iter() {
        if v != 0 {
            any = true;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
    }
    any.then_some(BoundingBox { x0, y0, x1, y1 })
}

/// Intersection-over-union of two equally sized masks.
/// Two empty masks have IoU 1.
pub fn mask_iou(a: &Mask, b: &Mask) -> f64 {
    assert_eq!(a.dim(), b.dim(), "IoU requires equal dimensions");
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&va, &vb) in a.iter().zip(b.iter()) {
        let fa = va != 0;
        let fb = vb != 0;
        if fa && fb {
            inter += 1;
        }
        if fa || fb {
            union += 1;
        }
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Bilinear sample of `image` at a fractional coordinate; points outside the
/// grid read as 0.
pub fn bilinear_sample(image: &Gray, x: f64, y: f64) -> f64 {
    let (h, w) = image.dim();
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let at = |xi: i64, yi: i64| -> f64 {
        if xi < 0 || yi < 0 || xi >= w as i64 || yi >= h as i64 {
            0.0
        } else {
            image[[yi as usize, xi as usize]]
        }
    };
    let (xi, yi) = (x0 as i64, y0 as i64);
    at(xi, yi) * (1.0 - fx) * (1.0 - fy)
        + at(xi + 1, yi) * fx * (1.0 - fy)
        + at(xi, yi + 1) * (1.0 - fx) * fy
        + at(xi + 1, yi + 1) * fx * fy
}

/// Nearest-neighbor sample of a mask; outside reads as 0.
pub fn nearest_sample(mask: &Mask, x: f64, y: f64) -> u8 {
    let (h, w) = mask.dim();
    let xi = x.round() as i64;
    let yi = y.round() as i64;
    if xi < 0 || yi < 0 || xi >= w as i64 || yi >= h as i64 {
        0
    } else {
        mask[[yi as usize, xi as usize]]
    }
}

/// Zeroes every intensity pixel outside the mask.
pub fn apply_mask(pixels: &Gray, mask: &Mask) -> Gray {
    assert_eq!(pixels.dim(), mask.dim());
    let mut out = pixels.clone();
    for (p, &m) in out.iter_mut().zip(mask.iter()) {
        if m == 0 {
            *p = 0.0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn centroid_and_bbox_of_small_mask() {
        let mask: Mask = array![[0, 0, 0], [0, 1, 1], [0, 0, 0]];
        assert_eq!(mask_area(&mask), 2);
        assert_eq!(mask_centroid(&mask), Some((1.5, 1.0)));
        let bb = mask_bbox(&mask).unwrap();
        assert_eq!((bb.x0, bb.y0, bb.x1, bb.y1), (1, 1, 2, 1));
        assert_eq!(bb.width(), 2);
        assert_eq!(bb.height(), 1);
    }

    #[test]
    fn empty_mask_has_no_centroid() {
        let mask: Mask = Array2::zeros((4, 4));
        assert_eq!(mask_centroid(&mask), None);
        assert!(mask_bbox(&mask).is_none());
    }

    #[test]
    fn iou_identities() {
        let a: Mask = array![[1, 0], [0, 1]];
        let b: Mask = array![[1, 0], [0, 0]];
        assert_eq!(mask_iou(&a, &a), 1.0);
        assert_eq!(mask_iou(&a, &b), 0.5);
        let z: Mask = Array2::zeros((2, 2));
        assert_eq!(mask_iou(&z, &z), 1.0);
    }

    #[test]
    fn bilinear_interpolates_between_pixels() {
        let img: Gray = array![[0.0, 1.0]];
        assert!((bilinear_sample(&img, 0.5, 0.0) - 0.5).abs() < 1e-12);
        assert_eq!(bilinear_sample(&img, -5.0, 0.0), 0.0);
    }
}
