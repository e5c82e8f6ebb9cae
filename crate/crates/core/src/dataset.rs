//! Corpus loading and glove-color segmentation.
//!
//! A corpus is described by a manifest CSV (`path,class,subject,repetition`)
//! so that directory layouts other than the reference one can be ingested.
//! [`scan_corpus_dir`] builds records from the reference file-naming scheme
//! (`<class>_<subject>_<repetition>.<ext>`, indices 1-based).

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use image::RgbImage;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Gray, Mask};
use crate::{NUM_CLASSES, NUM_REPETITIONS, NUM_SUBJECTS};

/// One labeled image of the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRecord {
    pub image_path: PathBuf,
    pub class_id: usize,
    pub subject_id: usize,
    pub repetition: usize,
}

impl SampleRecord {
    pub fn new(
        image_path: PathBuf,
        class_id: usize,
        subject_id: usize,
        repetition: usize,
    ) -> Result<Self> {
        if class_id >= NUM_CLASSES {
            return Err(Error::validation(format!(
                "class id {class_id} out of range 0..{NUM_CLASSES}"
            )));
        }
        if subject_id >= NUM_SUBJECTS {
            return Err(Error::validation(format!(
                "subject id {subject_id} out of range 0..{NUM_SUBJECTS}"
            )));
        }
        if repetition >= NUM_REPETITIONS {
            return Err(Error::validation(format!(
                "repetition {repetition} out of range 0..{NUM_REPETITIONS}"
            )));
        }
        Ok(SampleRecord {
            image_path,
            class_id,
            subject_id,
            repetition,
        })
    }

    /// Stable identifier used to key descriptor and prediction records.
    pub fn id(&self) -> String {
        format!("{}_{}_{}", self.class_id, self.subject_id, self.repetition)
    }
}

/// A loaded corpus: records plus class labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub records: Vec<SampleRecord>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(records: Vec<SampleRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !seen.insert((r.class_id, r.subject_id, r.repetition)) {
                return Err(Error::validation(format!(
                    "duplicate (class, subject, repetition) triple ({}, {}, {})",
                    r.class_id, r.subject_id, r.repetition
                )));
            }
        }
        Ok(Dataset {
            records,
            class_names: default_class_names(),
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn class_ids(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.class_id).collect()
    }

    pub fn subject_ids(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.subject_id).collect()
    }

    /// Checks the counts expected of the full 16-class/10-subject/5-repetition
    /// corpus: 800 records, 50 per class, 80 per subject.
    pub fn validate_complete(&self) -> Result<()> {
        let expected = NUM_CLASSES * NUM_SUBJECTS * NUM_REPETITIONS;
        if self.records.len() != expected {
            return Err(Error::validation(format!(
                "complete corpus must have {expected} records, found {}",
                self.records.len()
            )));
        }
        let mut per_class = [0usize; NUM_CLASSES];
        let mut per_subject = [0usize; NUM_SUBJECTS];
        for r in &self.records {
            per_class[r.class_id] += 1;
            per_subject[r.subject_id] += 1;
        }
        if per_class.iter().any(|&n| n != NUM_SUBJECTS * NUM_REPETITIONS) {
            return Err(Error::validation("per-class counts are uneven"));
        }
        if per_subject.iter().any(|&n| n != NUM_CLASSES * NUM_REPETITIONS) {
            return Err(Error::validation("per-subject counts are uneven"));
        }
        Ok(())
    }
}

fn default_class_names() -> Vec<String> {
    (0..NUM_CLASSES).map(|c| format!("class_{c:02}")).collect()
}

/// Loads a manifest CSV with header `path,class,subject,repetition`.
/// Relative image paths are resolved against the manifest's directory.
pub fn load_manifest(manifest_path: &Path) -> Result<Dataset> {
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(manifest_path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::Io(std::io::Error::new(
                std::io::ErrorKind::NotFound,
                format!("cannot open manifest {}: {e}", manifest_path.display()),
            )),
            _ => Error::Parse {
                line: 0,
                msg: e.to_string(),
            },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let expected = ["path", "class", "subject", "repetition"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            line: 1,
            msg: format!("manifest header must be `path,class,subject,repetition`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2; // 1-based, after the header
        let row = row.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if row.len() != 4 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 4 fields, got {}", row.len()),
            });
        }
        let parse_idx = |field: &str, name: &str| -> Result<usize> {
            field.parse::<usize>().map_err(|_| Error::Parse {
                line,
                msg: format!("field `{name}` is not a non-negative integer: `{field}`"),
            })
        };
        let path = base.join(&row[0]);
        let class_id = parse_idx(&row[1], "class")?;
        let subject_id = parse_idx(&row[2], "subject")?;
        let repetition = parse_idx(&row[3], "repetition")?;
        let record = SampleRecord::new(path, class_id, subject_id, repetition)
            .map_err(|e| Error::validation(format!("manifest line {line}: {e}")))?;
        records.push(record);
    }
    Dataset::new(records)
}

/// Writes records back out in manifest format.
pub fn write_manifest(records: &[SampleRecord], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::validation(e.to_string()))?;
    writer
        .write_record(["path", "class", "subject", "repetition"])
        .map_err(|e| Error::validation(e.to_string()))?;
    for r in records {
        writer
            .write_record([
                r.image_path.to_string_lossy().as_ref(),
                &r.class_id.to_string(),
                &r.subject_id.to_string(),
                &r.repetition.to_string(),
            ])
            .map_err(|e| Error::validation(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Scans a directory for `<class>_<subject>_<repetition>.<ext>` images.
/// `one_based` applies the reference corpus convention where indices start
/// at 1; pass `false` for already 0-based names. Files that do not match the
/// pattern are skipped. Output is sorted by (class, subject, repetition).
pub fn scan_corpus_dir(dir: &Path, one_based: bool) -> Result<Vec<SampleRecord>> {
    const EXTENSIONS: [&str; 4] = ["png", "bmp", "tif", "tiff"];
    let mut records = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let ext_ok = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            .unwrap_or(false);
        if !path.is_file() || !ext_ok {
            continue;
        }
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let parts: Vec<&str> = stem.split('_').collect();
        if parts.len() != 3 {
            continue;
        }
        let parsed: Option<Vec<usize>> = parts.iter().map(|p| p.parse().ok()).collect();
        let Some(mut idx) = parsed else { continue };
        if one_based {
            if idx.contains(&0) {
                return Err(Error::validation(format!(
                    "{}: found index 0 in a 1-based corpus scan",
                    path.display()
                )));
            }
            for v in &mut idx {
                *v -= 1;
            }
        }
        let record = SampleRecord::new(path.clone(), idx[0], idx[1], idx[2])
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))?;
        records.push(record);
    }
    records.sort_by_key(|r| (r.class_id, r.subject_id, r.repetition));
    Ok(records)
}

/// Decodes an image file to 8-bit RGB.
pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    Ok(image::open(path)?.to_rgb8())
}

/// HSV window selecting glove pixels. Hue is in degrees; a window with
/// `lo > hi` wraps around 0deg.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct GloveFilterConfig {
    pub hue_range: (f64, f64),
    pub min_saturation: f64,
    pub min_value: f64,
}

impl Default for GloveFilterConfig {
    /// Window for a fluorescent green glove. Capture conditions vary, so
    /// these are expected to be overridden per corpus.
    fn default() -> Self {
        GloveFilterConfig {
            hue_range: (90.0, 150.0),
            min_saturation: 0.35,
            min_value: 0.2,
        }
    }
}

impl GloveFilterConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.hue_range;
        if !(0.0..360.0).contains(&lo) || !(0.0..360.0).contains(&hi) {
            return Err(Error::validation(format!(
                "hue range endpoints must lie in [0, 360), got ({lo}, {hi})"
            )));
        }
        if !(0.0..=1.0).contains(&self.min_saturation) {
            return Err(Error::validation("min_saturation must be in [0, 1]"));
        }
        // min_value = 0 would admit black pixels and break re-segmentation.
        if !(self.min_value > 0.0 && self.min_value <= 1.0) {
            return Err(Error::validation("min_value must be in (0, 1]"));
        }
        Ok(())
    }

    pub fn hue_in_range(&self, hue: f64) -> bool {
        let (lo, hi) = self.hue_range;
        if lo <= hi {
            (lo..=hi).contains(&hue)
        } else {
            hue >= lo || hue <= hi
        }
    }

    pub fn accepts(&self, r: u8, g: u8, b: u8) -> bool {
        let (h, s, v) = rgb_to_hsv(r, g, b);
        self.hue_in_range(h) && s >= self.min_saturation && v >= self.min_value
    }
}

/// RGB bytes to (hue degrees in [0, 360), saturation, value), all from the
/// usual hexcone model.
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let r = r as f64 / 255.0;
    let g = g as f64 / 255.0;
    let b = b as f64 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;

    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / delta).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h.rem_euclid(360.0), s, max)
}

/// ITU-R BT.601 luma of RGB bytes, in [0, 1].
pub fn luminance(r: u8, g: u8, b: u8) -> f64 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0
}

/// Image whose only non-black pixels belong to the hand.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedImage {
    pub pixels: Gray,
    pub mask: Mask,
}

impl SegmentedImage {
    pub fn validate(&self) -> Result<()> {
        if self.pixels.dim() != self.mask.dim() {
            return Err(Error::dim(
                format!("{:?}", self.pixels.dim()),
                format!("{:?}", self.mask.dim()),
            ));
        }
        if self.mask.iter().all(|&m| m == 0) {
            return Err(Error::EmptyMask);
        }
        for (&p, &m) in self.pixels.iter().zip(self.mask.iter()) {
            if m == 0 && p != 0.0 {
                return Err(Error::validation(
                    "non-black pixel outside the segmentation mask",
                ));
            }
            if m > 1 {
                return Err(Error::validation("mask values must be 0 or 1"));
            }
        }
        Ok(())
    }
}

/// Keeps the luminance of pixels inside the HSV window, zeroes the rest.
pub fn segment_glove(rgb: &RgbImage, config: &GloveFilterConfig) -> Result<SegmentedImage> {
    config.validate()?;
    let (w, h) = rgb.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::validation("image has zero pixels"));
    }
    let mut pixels: Gray = Array2::zeros((h as usize, w as usize));
    let mut mask: Mask = Array2::zeros((h as usize, w as usize));
    let mut kept = 0usize;
    for (x, y, p) in rgb.enumerate_pixels() {
        let [r, g, b] = p.0;
        if config.accepts(r, g, b) {
            pixels[[y as usize, x as usize]] = luminance(r, g, b);
            mask[[y as usize, x as usize]] = 1;
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(Error::SegmentationEmpty);
    }
    Ok(SegmentedImage { pixels, mask })
}

/// True when the image already has a dominant black background, which marks
/// corpora distributed in pre-segmented form.
pub fn is_black_background(rgb: &RgbImage) -> bool {
    let near_black = rgb
        .pixels()
        .filter(|p| p.0.iter().all(|&c| c <= 2))
        .count();
    let total = (rgb.width() * rgb.height()) as usize;
    total > 0 && near_black * 5 >= total
}

/// Segments with the glove filter, or — when the background is already
/// black — takes every non-black pixel as foreground.
pub fn auto_segment(rgb: &RgbImage, config: &GloveFilterConfig) -> Result<SegmentedImage> {
    if !is_black_background(rgb) {
        return segment_glove(rgb, config);
    }
    let (w, h) = rgb.dimensions();
    let mut pixels: Gray = Array2::zeros((h as usize, w as usize));
    let mut mask: Mask = Array2::zeros((h as usize, w as usize));
    let mut kept = 0usize;
    for (x, y, p) in rgb.enumerate_pixels() {
        let [r, g, b] = p.0;
        if r > 2 || g > 2 || b > 2 {
            pixels[[y as usize, x as usize]] = luminance(r, g, b);
            mask[[y as usize, x as usize]] = 1;
            kept += 1;
        }
    }
    if kept == 0 {
        return Err(Error::SegmentationEmpty);
    }
    Ok(SegmentedImage { pixels, mask })
}
