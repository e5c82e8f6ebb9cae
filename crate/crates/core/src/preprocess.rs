//! Geometric canonicalization of a segmented hand image.
//!
//! The chain keeps the biggest connected component, derotates the hand so
//! its principal axis is vertical, flips it upright using the scanline
//! run-count heuristic, resamples to 128x128 preserving aspect ratio, and
//! extracts the mask contour.

use ndarray::Array2;

use crate::dataset::SegmentedImage;
use crate::error::{Error, Result};
use crate::grid::{
    apply_mask, bilinear_sample, mask_bbox, mask_centroid, nearest_sample, Gray, Mask,
};
use crate::CANONICAL_SIZE;

/// Mask centroid target and resample margin: the longer bounding-box side is
/// mapped to `CANONICAL_SIZE - 2 * CANONICAL_MARGIN` pixels so interpolation
/// never clips the hand.
pub const CANONICAL_MARGIN: usize = 4;

/// Hand inclination: major principal axis angle from the vertical image
/// axis, degrees, positive counterclockwise, range (-90, 90].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inclination {
    pub degrees: f64,
    /// Set when the mask is isotropic and the axis is undefined; the angle
    /// is reported as 0 and the pipeline continues.
    pub degenerate: bool,
}

/// Canonical 128x128 hand image with its mask and contour.
#[derive(Debug, Clone)]
pub struct CanonicalHandImage {
    pub pixels: Gray,
    pub mask: Mask,
    pub contour: Mask,
}

impl CanonicalHandImage {
    pub fn validate(&self) -> Result<()> {
        let want = (CANONICAL_SIZE, CANONICAL_SIZE);
        for (name, dim) in [
            ("pixels", self.pixels.dim()),
            ("mask", self.mask.dim()),
            ("contour", self.contour.dim()),
        ] {
            if dim != want {
                return Err(Error::dim(format!("{want:?} {name}"), format!("{dim:?}")));
            }
        }
        let (cx, cy) = mask_centroid(&self.mask).ok_or(Error::EmptyMask)?;
        let center = CANONICAL_SIZE as f64 / 2.0;
        if (cx - center).hypot(cy - center) > 1.0 {
            return Err(Error::validation(format!(
                "mask centroid ({cx:.2}, {cy:.2}) farther than 1 px from center"
            )));
        }
        let incl = principal_inclination(&self.mask)?;
        if !incl.degenerate && incl.degrees.abs() >= 2.0 {
            return Err(Error::validation(format!(
                "canonical inclination {:.2} deg exceeds 2 deg",
                incl.degrees
            )));
        }
        for ((y, x), &c) in self.contour.indexed_iter() {
            if c == 0 {
                continue;
            }
            if self.mask[[y, x]] == 0 {
                return Err(Error::validation("contour pixel outside mask"));
            }
            if !has_background_4_neighbor(&self.mask, y, x) {
                return Err(Error::validation(
                    "contour pixel has no background 4-neighbor",
                ));
            }
        }
        Ok(())
    }
}

fn has_background_4_neighbor(mask: &Mask, y: usize, x: usize) -> bool {
    let (h, w) = mask.dim();
    let neighbors = [
        (y.wrapping_sub(1), x),
        (y + 1, x),
        (y, x.wrapping_sub(1)),
        (y, x + 1),
    ];
    neighbors
        .iter()
        .any(|&(ny, nx)| ny >= h || nx >= w || mask[[ny, nx]] == 0)
}

/// Keeps only the 8-connected component with the most pixels.
/// Ties go to the component containing the smallest row-major pixel index.
pub fn largest_component(mask: &Mask) -> Result<Mask> {
    let (h, w) = mask.dim();
    let mut labels: Array2<u32> = Array2::zeros((h, w));
    let mut sizes: Vec<usize> = vec![0]; // label 0 = background
    let mut stack = Vec::new();

    for start_y in 0..h {
        for start_x in 0..w {
            if mask[[start_y, start_x]] == 0 || labels[[start_y, start_x]] != 0 {
                continue;
            }
            let label = sizes.len() as u32;
            sizes.push(0);
            stack.push((start_y, start_x));
            labels[[start_y, start_x]] = label;
            while let Some((y, x)) = stack.pop() {
                sizes[label as usize] += 1;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (ny, nx) = (y as i64 + dy, x as i64 + dx);
                        if ny < 0 || nx < 0 || ny >= h as i64 || nx >= w as i64 {
                            continue;
                        }
                        let (ny, nx) = (ny as usize, nx as usize);
                        if mask[[ny, nx]] != 0 && labels[[ny, nx]] == 0 {
                            labels[[ny, nx]] = label;
                            stack.push((ny, nx));
                        }
                    }
                }
            }
        }
    }

    if sizes.len() == 1 {
        return Err(Error::EmptyMask);
    }
    // first maximal label wins, which is the component seen first in
    // row-major order
    let best = sizes
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(label, _)| label as u32)
        .unwrap();
    Ok(labels.mapv(|l| u8::from(l == best)))
}

/// Major principal axis angle from vertical via second central moments.
///
/// With u = row and v = column deviations, the angle is
/// `0.5 * atan2(2 * mu11, mu20 - mu02)` where `mu20` is the vertical and
/// `mu02` the horizontal variance. Isotropic masks return 0 flagged
/// degenerate.
pub fn principal_inclination(mask: &Mask) -> Result<Inclination> {
    let (cx, cy) = mask_centroid(mask).ok_or(Error::EmptyMask)?;
    let mut mu20 = 0.0; // row variance
    let mut mu02 = 0.0; // column variance
    let mut mu11 = 0.0;
    let mut n = 0.0;
    for ((y, x), &v) in mask.indexed_iter() {
        if v != 0 {
            let du = y as f64 - cy;
            let dv = x as f64 - cx;
            mu20 += du * du;
            mu02 += dv * dv;
            mu11 += du * dv;
            n += 1.0;
        }
    }
    mu20 /= n;
    mu02 /= n;
    mu11 /= n;

    let spread = mu20 + mu02;
    if spread <= 0.0 || (mu11.abs() <= 1e-9 * spread && (mu20 - mu02).abs() <= 1e-9 * spread) {
        return Ok(Inclination {
            degrees: 0.0,
            degenerate: true,
        });
    }

    let mut phi = 0.5 * (2.0 * mu11).atan2(mu20 - mu02).to_degrees();
    // map (-90, 90]; atan2/2 already yields (-90, 90], guard the open end
    if phi <= -90.0 {
        phi += 180.0;
    }
    Ok(Inclination {
        degrees: phi,
        degenerate: false,
    })
}

fn rotated_canvas(w: usize, h: usize, angle_deg: f64) -> (usize, usize) {
    let rad = angle_deg.to_radians();
    let (s, c) = (rad.sin().abs(), rad.cos().abs());
    let nw = (w as f64 * c + h as f64 * s).ceil() as usize;
    let nh = (w as f64 * s + h as f64 * c).ceil() as usize;
    (nw.max(1), nh.max(1))
}

// Inverse-maps output pixels through the rotation; positive angles turn the
// content counterclockwise on screen (y grows downward).
fn rotate_points<T, F>(w: usize, h: usize, angle_deg: f64, sample: F) -> Array2<T>
where
    T: Clone + Default,
    F: Fn(f64, f64) -> T,
{
    let (nw, nh) = rotated_canvas(w, h, angle_deg);
    let rad = angle_deg.to_radians();
    let (sin, cos) = (rad.sin(), rad.cos());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (ncx, ncy) = ((nw as f64 - 1.0) / 2.0, (nh as f64 - 1.0) / 2.0);
    let mut out = Array2::default((nh, nw));
    for oy in 0..nh {
        for ox in 0..nw {
            let dx = ox as f64 - ncx;
            let dy = oy as f64 - ncy;
            let sx = cos * dx - sin * dy + cx;
            let sy = sin * dx + cos * dy + cy;
            out[[oy, ox]] = sample(sx, sy);
        }
    }
    out
}

/// Rotates an intensity image about its center with bilinear interpolation.
/// The canvas grows so nothing is clipped; background fills with 0.
pub fn rotate_image(image: &Gray, angle_deg: f64) -> Gray {
    let (h, w) = image.dim();
    rotate_points(w, h, angle_deg, |x, y| bilinear_sample(image, x, y))
}

/// Rotates a binary mask about its center with nearest-neighbor sampling.
pub fn rotate_mask(mask: &Mask, angle_deg: f64) -> Mask {
    let (h, w) = mask.dim();
    rotate_points(w, h, angle_deg, |x, y| nearest_sample(mask, x, y))
}

/// Number of foreground runs on each scanline of the mask.
fn scanline_run_counts(mask: &Mask) -> Vec<usize> {
    let (h, w) = mask.dim();
    (0..h)
        .map(|y| {
            let mut runs = 0;
            let mut prev = 0u8;
            for x in 0..w {
                let v = mask[[y, x]];
                if v != 0 && prev == 0 {
                    runs += 1;
                }
                prev = v;
            }
            runs
        })
        .collect()
}

// Modal value of the nonzero run counts; frequency ties go to the larger
// count so a finger-dense half wins against noise.
fn modal_run_count(counts: &[usize]) -> usize {
    let mut freq = std::collections::BTreeMap::new();
    for &c in counts.iter().filter(|&&c| c > 0) {
        *freq.entry(c).or_insert(0usize) += 1;
    }
    freq.into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(count, _)| count)
        .unwrap_or(0)
}

fn flip_180<T: Clone>(grid: &Array2<T>) -> Array2<T> {
    let (h, w) = grid.dim();
    Array2::from_shape_fn((h, w), |(y, x)| grid[[h - 1 - y, w - 1 - x]].clone())
}

/// Decides whether the fingers sit in the top or bottom half of the mask's
/// bounding box by comparing the modal scanline run count of each half, and
/// rotates image and mask by 180 degrees when they sit at the bottom.
/// Ties leave the input unchanged.
pub fn upright_correction(image: &Gray, mask: &Mask) -> Result<(Gray, Mask)> {
    let bbox = mask_bbox(mask).ok_or(Error::EmptyMask)?;
    let runs = scanline_run_counts(mask);
    let height = bbox.height();
    let mut top = Vec::new();
    let mut bottom = Vec::new();
    for (offset, &count) in runs[bbox.y0..=bbox.y1].iter().enumerate() {
        if offset * 2 < height {
            top.push(count);
        } else {
            bottom.push(count);
        }
    }
    if modal_run_count(&bottom) > modal_run_count(&top) {
        Ok((flip_180(image), flip_180(mask)))
    } else {
        Ok((image.clone(), mask.clone()))
    }
}

/// Uniformly scales the mask's bounding box so its longer side spans
/// `CANONICAL_SIZE - 2 * CANONICAL_MARGIN` pixels and places the mask
/// centroid at the canonical center. Bilinear for intensities, nearest for
/// the mask.
///
/// Centering is by centroid, so an asymmetric mask sits off-center within
/// its bounding box; the scale shrinks below the nominal one when needed so
/// no extent ever leaves the frame.
pub fn resample_center(image: &Gray, mask: &Mask) -> Result<(Gray, Mask)> {
    let bbox = mask_bbox(mask).ok_or(Error::EmptyMask)?;
    let (cx, cy) = mask_centroid(mask).expect("bbox implies nonempty");
    let long_side = bbox.width().max(bbox.height()) as f64;
    let center = CANONICAL_SIZE as f64 / 2.0;
    let margin = 1.0;
    let reach = center - margin - 1.0;
    let mut scale = (CANONICAL_SIZE - 2 * CANONICAL_MARGIN) as f64 / long_side;
    for extent in [
        cx - bbox.x0 as f64,
        bbox.x1 as f64 - cx,
        cy - bbox.y0 as f64,
        bbox.y1 as f64 - cy,
    ] {
        if extent > 0.0 {
            scale = scale.min(reach / extent);
        }
    }

    let mut out_pixels: Gray = Array2::zeros((CANONICAL_SIZE, CANONICAL_SIZE));
    let mut out_mask: Mask = Array2::zeros((CANONICAL_SIZE, CANONICAL_SIZE));
    for oy in 0..CANONICAL_SIZE {
        for ox in 0..CANONICAL_SIZE {
            let sx = (ox as f64 - center) / scale + cx;
            let sy = (oy as f64 - center) / scale + cy;
            out_pixels[[oy, ox]] = bilinear_sample(image, sx, sy);
            out_mask[[oy, ox]] = nearest_sample(mask, sx, sy);
        }
    }
    if out_mask.iter().all(|&m| m == 0) {
        return Err(Error::EmptyMask);
    }
    Ok((out_pixels, out_mask))
}

/// Inner boundary of the mask: pixels removed by an erosion with the
/// 4-connected cross element, so every contour pixel touches background
/// through a 4-neighbor.
pub fn extract_contour(mask: &Mask) -> Mask {
    let (h, w) = mask.dim();
    Array2::from_shape_fn((h, w), |(y, x)| {
        u8::from(mask[[y, x]] != 0 && has_background_4_neighbor(mask, y, x))
    })
}

/// Rotations below this angle sit under the mask discretization noise and
/// are skipped; re-sampling for them only churns boundary pixels.
pub const DEROTATION_THRESHOLD_DEG: f64 = 1.0;

/// Intermediate intensity images of the canonicalization chain, for debug
/// output. The final mask and contour live on [`CanonicalHandImage`].
#[derive(Debug, Clone)]
pub struct StageImages {
    /// Largest component of the segmented input.
    pub segmented: Gray,
    /// After principal-axis derotation.
    pub oriented: Gray,
    /// After the 180-degree upright correction.
    pub corrected: Gray,
}

/// Full canonicalization chain.
pub fn canonicalize(seg: &SegmentedImage) -> Result<CanonicalHandImage> {
    canonicalize_with_stages(seg).map(|(canonical, _)| canonical)
}

/// Canonicalization that also returns the intermediate stage images.
pub fn canonicalize_with_stages(
    seg: &SegmentedImage,
) -> Result<(CanonicalHandImage, StageImages)> {
    let component = largest_component(&seg.mask)?;
    let pixels = apply_mask(&seg.pixels, &component);

    let inclination = principal_inclination(&component)?;
    let (derotated, derotated_mask) =
        if inclination.degenerate || inclination.degrees.abs() < DEROTATION_THRESHOLD_DEG {
            (pixels.clone(), component.clone())
        } else {
            (
                rotate_image(&pixels, -inclination.degrees),
                rotate_mask(&component, -inclination.degrees),
            )
        };

    let (upright, upright_mask) = upright_correction(&derotated, &derotated_mask)?;
    let (resampled, resampled_mask) = resample_center(&upright, &upright_mask)?;
    let contour = extract_contour(&resampled_mask);
    let stages = StageImages {
        segmented: pixels,
        oriented: derotated,
        corrected: upright,
    };
    Ok((
        CanonicalHandImage {
            pixels: apply_mask(&resampled, &resampled_mask),
            mask: resampled_mask,
            contour,
        },
        stages,
    ))
}
