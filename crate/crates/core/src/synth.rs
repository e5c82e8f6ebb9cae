//! Synthetic hand silhouettes for tests and demos.
//!
//! Shapes are unions of analytic primitives in a local frame (origin at the
//! shape center, y down, fingers toward -y), rasterized under an arbitrary
//! rotation and scale by testing each pixel center for membership. Rendering
//! therefore carries no interpolation artifacts of its own.

use image::{Rgb, RgbImage};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use crate::dataset::{SampleRecord, SegmentedImage};
use crate::error::Result;
use crate::grid::{Gray, Mask};

/// Axis-aligned primitive in shape-local coordinates.
#[derive(Debug, Clone, Copy)]
pub enum Primitive {
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
    Rect { cx: f64, cy: f64, w: f64, h: f64 },
}

impl Primitive {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Primitive::Ellipse { cx, cy, rx, ry } => {
                ((x - cx) / rx).powi(2) + ((y - cy) / ry).powi(2) <= 1.0
            }
            Primitive::Rect { cx, cy, w, h } => {
                (x - cx).abs() <= w / 2.0 && (y - cy).abs() <= h / 2.0
            }
        }
    }
}

fn palm_and_wrist() -> Vec<Primitive> {
    vec![
        Primitive::Rect {
            cx: 0.0,
            cy: 20.0,
            w: 64.0,
            h: 66.0,
        },
        Primitive::Ellipse {
            cx: 0.0,
            cy: 56.0,
            rx: 22.0,
            ry: 16.0,
        },
    ]
}

fn fingers(count: usize, width: f64, height: f64) -> Vec<Primitive> {
    let span = 60.0;
    (0..count)
        .map(|i| {
            let cx = if count == 1 {
                0.0
            } else {
                -span / 2.0 + span * i as f64 / (count - 1) as f64
            };
            Primitive::Rect {
                cx,
                cy: -13.0 - height / 2.0,
                w: width,
                h: height + 12.0, // overlap into the palm
            }
        })
        .collect()
}

/// One of four distinct silhouette classes, distinguished by finger count
/// and proportion. Every class has more scanline runs in its finger half
/// than in its palm half, so the upright heuristic has a stable answer.
pub fn hand_shape(class: usize) -> Vec<Primitive> {
    let mut prims = palm_and_wrist();
    match class % 4 {
        0 => prims.extend(fingers(4, 10.0, 44.0)),
        1 => prims.extend(fingers(3, 13.0, 50.0)),
        2 => {
            prims.extend(fingers(2, 16.0, 56.0));
            // thumb to the side
            prims.push(Primitive::Ellipse {
                cx: 38.0,
                cy: 6.0,
                rx: 12.0,
                ry: 9.0,
            });
        }
        _ => {
            prims.extend(fingers(2, 10.0, 30.0));
            prims.push(Primitive::Ellipse {
                cx: 0.0,
                cy: -20.0,
                rx: 30.0,
                ry: 14.0,
            });
        }
    }
    prims
}

/// The default pronged silhouette used where only one shape is needed.
pub fn hand_like_shape() -> Vec<Primitive> {
    hand_shape(1)
}

/// Rasterizes a shape rotated counterclockwise on screen by `rotation_deg`
/// and scaled by `scale` into a `canvas` x `canvas` mask.
pub fn render_mask(
    prims: &[Primitive],
    rotation_deg: f64,
    scale: f64,
    canvas: usize,
) -> Mask {
    let rad = rotation_deg.to_radians();
    let (sin, cos) = (rad.sin(), rad.cos());
    let c = (canvas as f64 - 1.0) / 2.0;
    Array2::from_shape_fn((canvas, canvas), |(y, x)| {
        let dx = x as f64 - c;
        let dy = y as f64 - c;
        // undo rotation and scale to get back to shape-local coordinates
        let lx = (cos * dx + sin * dy) / scale;
        let ly = (-sin * dx + cos * dy) / scale;
        u8::from(prims.iter().any(|p| p.contains(lx, ly)))
    })
}

/// Wraps a mask as a segmented image with flat unit intensity.
pub fn mask_to_segmented(mask: &Mask) -> SegmentedImage {
    SegmentedImage {
        pixels: mask.mapv(|v| v as f64),
        mask: mask.clone(),
    }
}

/// Smooth radial-gradient intensities inside the mask, handy when a test
/// needs non-flat pixels.
pub fn mask_to_shaded(mask: &Mask) -> Gray {
    let (h, w) = mask.dim();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let rmax = cx.min(cy);
    Array2::from_shape_fn((h, w), |(y, x)| {
        if mask[[y, x]] == 0 {
            0.0
        } else {
            let r = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            (1.0 - 0.6 * (r / rmax)).clamp(0.2, 1.0)
        }
    })
}

/// Paints the mask in a saturated glove color on black.
pub fn mask_to_glove_rgb(mask: &Mask, rgb: [u8; 3]) -> RgbImage {
    let (h, w) = mask.dim();
    let mut img = RgbImage::new(w as u32, h as u32);
    for ((y, x), &m) in mask.indexed_iter() {
        if m != 0 {
            img.put_pixel(x as u32, y as u32, Rgb(rgb));
        }
    }
    img
}

/// Fluorescent green inside the default filter window.
pub const GLOVE_RGB: [u8; 3] = [40, 220, 60];

/// Renders a labeled corpus of rotated silhouettes to `dir` as PNG files
/// plus a `manifest.csv`, and returns the manifest path. Classes cycle
/// through the four silhouettes; rotations and scales are seeded.
pub fn write_synthetic_corpus(
    dir: &Path,
    classes: usize,
    per_class: usize,
    seed: u64,
) -> Result<std::path::PathBuf> {
    assert!(classes <= 4, "only 4 distinct silhouettes are defined");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    std::fs::create_dir_all(dir)?;
    for class in 0..classes {
        let prims = hand_shape(class);
        for rep in 0..per_class {
            let rotation = rng.gen_range(-90.0..=90.0);
            let scale = rng.gen_range(0.7..1.2);
            let mask = render_mask(&prims, rotation, scale, 220);
            let img = mask_to_glove_rgb(&mask, GLOVE_RGB);
            let name = format!("{class}_{}_{}.png", rep % crate::NUM_SUBJECTS, rep / crate::NUM_SUBJECTS);
            let path = dir.join(&name);
            img.save(&path)?;
            records.push(SampleRecord::new(
                path,
                class,
                rep % crate::NUM_SUBJECTS,
                rep / crate::NUM_SUBJECTS,
            )?);
        }
    }
    // manifest entries are resolved against the manifest's directory, so
    // store bare file names
    let manifest = dir.join("manifest.csv");
    let rows: Vec<SampleRecord> = records
        .iter()
        .map(|r| SampleRecord {
            image_path: r.image_path.file_name().unwrap().into(),
            ..r.clone()
        })
        .collect();
    crate::dataset::write_manifest(&rows, &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{mask_area, mask_bbox};

    #[test]
    fn shapes_render_nonempty_and_distinct() {
        let mut areas = Vec::new();
        for class in 0..4 {
            let mask = render_mask(&hand_shape(class), 0.0, 1.0, 200);
            let area = mask_area(&mask);
            assert!(area > 2000, "class {class} area {area}");
            areas.push(area);
        }
        areas.sort_unstable();
        areas.dedup();
        assert_eq!(areas.len(), 4, "silhouette areas should differ");
    }

    #[test]
    fn rotation_stays_inside_canvas() {
        for rotation in [-90.0, -45.0, 30.0, 90.0] {
            let mask = render_mask(&hand_like_shape(), rotation, 1.2, 220);
            let bb = mask_bbox(&mask).unwrap();
            assert!(bb.x0 > 0 && bb.y0 > 0 && bb.x1 < 219 && bb.y1 < 219);
        }
    }

    #[test]
    fn corpus_writes_images_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = write_synthetic_corpus(dir.path(), 4, 3, 7).unwrap();
        let ds = crate::dataset::load_manifest(&manifest).unwrap();
        assert_eq!(ds.len(), 12);
        for r in &ds.records {
            assert!(r.image_path.exists());
        }
    }
}
