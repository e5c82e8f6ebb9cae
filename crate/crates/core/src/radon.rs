//! Discrete Radon transform and the 32x32 descriptor derived from it.
//!
//! Lines are parameterized by `(b, theta)`: `theta` in 1..=180 degrees is
//! the angle of the line normal with the horizontal axis and `b` the signed
//! offset from the image center along that normal. A pixel at
//! center-relative `(x, y)` projects to offset `x cos(theta) + y sin(theta)`;
//! its intensity is splat onto the two nearest integer offset bins with
//! linear weights, which makes the transform exactly linear and
//! mass-preserving per angle.

use ndarray::Array2;

use crate::descriptor::{DescriptorKind, DescriptorSet};
use crate::error::{Error, Result};
use crate::grid::Gray;
use crate::CANONICAL_SIZE;

/// Angle rows: theta = 1..=180 degrees.
pub const ANGLE_COUNT: usize = 180;
/// Offset bins b = -91..=91 at 1-pixel spacing, covering the 128x128
/// diagonal about the center.
pub const OFFSET_HALF: i64 = 91;
pub const OFFSET_COUNT: usize = 2 * OFFSET_HALF as usize + 1;
/// Side of the resampled square descriptor.
pub const DESCRIPTOR_SIDE: usize = 32;

/// Raw projection matrix, `ANGLE_COUNT` x `OFFSET_COUNT`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub values: Array2<f64>,
}

impl Sinogram {
    /// Angle in degrees for a row index.
    pub fn angle_of_row(row: usize) -> f64 {
        (row + 1) as f64
    }

    /// Signed offset for a column index.
    pub fn offset_of_col(col: usize) -> f64 {
        col as f64 - OFFSET_HALF as f64
    }
}

/// 32x32 descriptor; rows aggregate angle bands, columns offset bands.
#[derive(Debug, Clone, PartialEq)]
pub struct RadonDescriptor {
    pub r: Array2<f64>,
}

/// Splat projection of one angle; `theta_deg` need not be integral.
/// Bin k holds offset `k - OFFSET_HALF`.
pub fn project_angle(image: &Gray, theta_deg: f64) -> Vec<f64> {
    let (h, w) = image.dim();
    let rad = theta_deg.to_radians();
    let (sin, cos) = (rad.sin(), rad.cos());
    let cx = w as f64 / 2.0;
    let cy = h as f64 / 2.0;
    let mut row = vec![0.0; OFFSET_COUNT];
    for ((y, x), &v) in image.indexed_iter() {
        if v == 0.0 {
            continue;
        }
        let s = (x as f64 - cx) * cos + (y as f64 - cy) * sin + OFFSET_HALF as f64;
        let lo = s.floor();
        let frac = s - lo;
        let lo = lo as i64;
        if (0..OFFSET_COUNT as i64).contains(&lo) {
            row[lo as usize] += v * (1.0 - frac);
        }
        if (0..OFFSET_COUNT as i64).contains(&(lo + 1)) {
            row[(lo + 1) as usize] += v * frac;
        }
    }
    row
}

/// Full transform of a canonical-size image.
pub fn radon_transform(image: &Gray) -> Result<Sinogram> {
    let (h, w) = image.dim();
    if h != CANONICAL_SIZE || w != CANONICAL_SIZE {
        return Err(Error::dim(
            format!("{CANONICAL_SIZE}x{CANONICAL_SIZE} image"),
            format!("{h}x{w}"),
        ));
    }
    let mut values = Array2::zeros((ANGLE_COUNT, OFFSET_COUNT));
    for row in 0..ANGLE_COUNT {
        let projected = project_angle(image, Sinogram::angle_of_row(row));
        for (col, v) in projected.into_iter().enumerate() {
            values[[row, col]] = v;
        }
    }
    Ok(Sinogram { values })
}

// Overlap weights mapping `in_len` unit cells onto `out_len` equal bands.
// Returned as, per band, the (cell, overlap) pairs; overlaps per band sum to
// in_len / out_len.
fn band_weights(in_len: usize, out_len: usize) -> Vec<Vec<(usize, f64)>> {
    let step = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|band| {
            let lo = band as f64 * step;
            let hi = lo + step;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(in_len);
            (first..last)
                .filter_map(|cell| {
                    let overlap = (hi.min(cell as f64 + 1.0) - lo.max(cell as f64)).max(0.0);
                    (overlap > 0.0).then_some((cell, overlap))
                })
                .collect()
        })
        .collect()
}

/// Area-weighted block average down to 32x32.
pub fn resample_sinogram(sinogram: &Sinogram) -> RadonDescriptor {
    let row_bands = band_weights(ANGLE_COUNT, DESCRIPTOR_SIDE);
    let col_bands = band_weights(OFFSET_COUNT, DESCRIPTOR_SIDE);
    let cell_area =
        (ANGLE_COUNT as f64 / DESCRIPTOR_SIDE as f64) * (OFFSET_COUNT as f64 / DESCRIPTOR_SIDE as f64);
    let mut r = Array2::zeros((DESCRIPTOR_SIDE, DESCRIPTOR_SIDE));
    for (i, rows) in row_bands.iter().enumerate() {
        for (j, cols) in col_bands.iter().enumerate() {
            let mut acc = 0.0;
            for &(row, wr) in rows {
                for &(col, wc) in cols {
                    acc += wr * wc * sinogram.values[[row, col]];
                }
            }
            r[[i, j]] = acc / cell_area;
        }
    }
    RadonDescriptor { r }
}

/// Row-major flattening to the 1024-component global vector.
pub fn to_global(descriptor: &RadonDescriptor) -> Vec<f64> {
    descriptor.r.iter().copied().collect()
}

/// The 32 rows as a descriptor set, row i covering angle band i.
pub fn to_local_rows(descriptor: &RadonDescriptor) -> DescriptorSet {
    let vectors = descriptor
        .r
        .rows()
        .into_iter()
        .map(|row| row.to_vec())
        .collect();
    DescriptorSet::new(DescriptorKind::RadonLocal, vectors)
        .expect("32 rows of 32 satisfy the radon-local invariant")
}
