//! PNG round-tripping for intensity grids and masks.

use std::path::Path;

use image::{GrayImage, Luma};
use ndarray::Array2;

use crate::error::Result;
use crate::grid::{Gray, Mask};

/// Writes intensities as 8-bit grayscale, values scaled by 255.
pub fn save_gray_png(image: &Gray, path: &Path) -> Result<()> {
    let (h, w) = image.dim();
    let mut out = GrayImage::new(w as u32, h as u32);
    for ((y, x), &v) in image.indexed_iter() {
        out.put_pixel(x as u32, y as u32, Luma([(v.clamp(0.0, 1.0) * 255.0).round() as u8]));
    }
    out.save(path)?;
    Ok(())
}

/// Loads any grayscale-convertible image into intensities in [0, 1].
pub fn load_gray_png(path: &Path) -> Result<Gray> {
    let img = image::open(path)?.to_luma8();
    let (w, h) = img.dimensions();
    Ok(Array2::from_shape_fn((h as usize, w as usize), |(y, x)| {
        img.get_pixel(x as u32, y as u32).0[0] as f64 / 255.0
    }))
}

/// Writes a binary mask with foreground as 255.
pub fn save_mask_png(mask: &Mask, path: &Path) -> Result<()> {
    let (h, w) = mask.dim();
    let mut out = GrayImage::new(w as u32, h as u32);
    for ((y, x), &v) in mask.indexed_iter() {
        out.put_pixel(x as u32, y as u32, Luma([if v != 0 { 255 } else { 0 }]));
    }
    out.save(path)?;
    Ok(())
}

/// Loads a mask; any pixel above half intensity is foreground.
pub fn load_mask_png(path: &Path) -> Result<Mask> {
    let img = image::open(path)?.to_luma8();
    let (w, h) = img.dimensions();
    Ok(Array2::from_shape_fn((h as usize, w as usize), |(y, x)| {
        u8::from(img.get_pixel(x as u32, y as u32).0[0] > 127)
    }))
}
