//! SIFT-style keypoints and gradient-histogram descriptors.
//!
//! Keypoints are difference-of-Gaussians extrema over a small scale pyramid,
//! contrast-thresholded and filtered by the Hessian edge-response ratio,
//! each assigned its dominant gradient orientation. The descriptor is the
//! classic 4x4-cell, 8-orientation-bin spatial histogram of Gaussian- and
//! magnitude-weighted gradients, accumulated with trilinear interpolation
//! and L2-normalized.
//!
//! Parameters the original method leaves free are fixed here as documented
//! defaults in [`SiftConfig`]; the descriptor window is 16x16 pixels at base
//! scale for every keypoint. The goal is a reproducible variable-cardinality
//! feature set, not compatibility with any particular SIFT library.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::descriptor::{DescriptorKind, DescriptorSet};
use crate::error::{Error, Result};
use crate::grid::{bilinear_sample, Gray};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SiftConfig {
    pub octaves: usize,
    pub scales_per_octave: usize,
    /// Blur of the first pyramid level; the input is assumed pre-blurred at
    /// sigma 0.5.
    pub base_sigma: f64,
    /// Minimum absolute DoG response at an extremum.
    pub contrast_threshold: f64,
    /// Maximum principal-curvature ratio before an extremum counts as an
    /// edge response and is dropped.
    pub edge_ratio: f64,
    /// Descriptor window side in base-scale pixels; the Gaussian weight has
    /// sigma = half this window.
    pub descriptor_window: usize,
    /// Scale given to the centroid fallback keypoint.
    pub fallback_scale: f64,
}

impl Default for SiftConfig {
    fn default() -> Self {
        SiftConfig {
            octaves: 3,
            scales_per_octave: 3,
            base_sigma: 1.6,
            contrast_threshold: 0.03,
            edge_ratio: 10.0,
            descriptor_window: 16,
            fallback_scale: 4.0,
        }
    }
}

const ORIENTATION_BINS: usize = 36;
const DESCRIPTOR_CELLS: usize = 4;
const DESCRIPTOR_ORIENT_BINS: usize = 8;
const INPUT_ASSUMED_SIGMA: f64 = 0.5;

/// A point of interest with its scale and dominant orientation (degrees).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    pub orientation: f64,
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as usize;
    let mut kernel: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }
    kernel
}

/// Separable Gaussian blur with clamped borders.
fn gaussian_blur(image: &Gray, sigma: f64) -> Gray {
    if sigma <= 0.0 {
        return image.clone();
    }
    let kernel = gaussian_kernel(sigma);
    let radius = kernel.len() / 2;
    let (h, w) = image.dim();

    let mut horizontal: Gray = Array2::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &k) in kernel.iter().enumerate() {
                let sx = (x + i).saturating_sub(radius).min(w - 1);
                acc += image[[y, sx]] * k;
            }
            horizontal[[y, x]] = acc;
        }
    }
    let mut out: Gray = Array2::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &k) in kernel.iter().enumerate() {
                let sy = (y + i).saturating_sub(radius).min(h - 1);
                acc += horizontal[[sy, x]] * k;
            }
            out[[y, x]] = acc;
        }
    }
    out
}

fn downsample_by_2(image: &Gray) -> Gray {
    let (h, w) = image.dim();
    Array2::from_shape_fn((h / 2, w / 2), |(y, x)| image[[y * 2, x * 2]])
}

struct Octave {
    /// scales_per_octave + 3 progressively blurred images
    gaussians: Vec<Gray>,
    /// pairwise differences of the gaussians
    dogs: Vec<Gray>,
    /// blur level of each gaussian, in this octave's pixel units
    sigmas: Vec<f64>,
}

fn build_pyramid(image: &Gray, config: &SiftConfig) -> Vec<Octave> {
    let s = config.scales_per_octave;
    let levels = s + 3;
    let k = 2f64.powf(1.0 / s as f64);
    let sigmas: Vec<f64> = (0..levels).map(|i| config.base_sigma * k.powi(i as i32)).collect();

    let mut octaves = Vec::new();
    let initial = (config.base_sigma.powi(2) - INPUT_ASSUMED_SIGMA.powi(2))
        .max(0.0)
        .sqrt();
    let mut base = gaussian_blur(image, initial);
    for _ in 0..config.octaves {
        let mut gaussians = vec![base.clone()];
        for i in 1..levels {
            let delta = (sigmas[i].powi(2) - sigmas[i - 1].powi(2)).sqrt();
            gaussians.push(gaussian_blur(&gaussians[i - 1], delta));
        }
        let dogs = (0..levels - 1)
            .map(|i| &gaussians[i + 1] - &gaussians[i])
            .collect();
        let next_base = downsample_by_2(&gaussians[s]);
        octaves.push(Octave {
            gaussians,
            dogs,
            sigmas: sigmas.clone(),
        });
        if next_base.dim().0 < 16 || next_base.dim().1 < 16 {
            break;
        }
        base = next_base;
    }
    octaves
}

fn is_extremum(dogs: &[Gray], level: usize, y: usize, x: usize) -> bool {
    let v = dogs[level][[y, x]];
    let mut maximal = true;
    let mut minimal = true;
    for dl in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dl == 0 && dy == 0 && dx == 0 {
                    continue;
                }
                let n = dogs[(level as i64 + dl) as usize]
                    [[(y as i64 + dy) as usize, (x as i64 + dx) as usize]];
                if n >= v {
                    maximal = false;
                }
                if n <= v {
                    minimal = false;
                }
                if !maximal && !minimal {
                    return false;
                }
            }
        }
    }
    maximal || minimal
}

fn passes_edge_test(dog: &Gray, y: usize, x: usize, edge_ratio: f64) -> bool {
    let dxx = dog[[y, x + 1]] + dog[[y, x - 1]] - 2.0 * dog[[y, x]];
    let dyy = dog[[y + 1, x]] + dog[[y - 1, x]] - 2.0 * dog[[y, x]];
    let dxy = (dog[[y + 1, x + 1]] - dog[[y + 1, x - 1]] - dog[[y - 1, x + 1]]
        + dog[[y - 1, x - 1]])
        / 4.0;
    let trace = dxx + dyy;
    let det = dxx * dyy - dxy * dxy;
    if det <= 0.0 {
        return false;
    }
    trace * trace / det < (edge_ratio + 1.0).powi(2) / edge_ratio
}

fn gradient(image: &Gray, y: usize, x: usize) -> (f64, f64) {
    let (h, w) = image.dim();
    let gx = (image[[y, (x + 1).min(w - 1)]] - image[[y, x.saturating_sub(1)]]) / 2.0;
    let gy = (image[[(y + 1).min(h - 1), x]] - image[[y.saturating_sub(1), x]]) / 2.0;
    (gx, gy)
}

/// Dominant gradient direction in a Gaussian-weighted window, degrees in
/// [0, 360). Returns 0 when there is no gradient at all.
fn dominant_orientation(image: &Gray, cx: f64, cy: f64, sigma: f64) -> f64 {
    let (h, w) = image.dim();
    let radius = (3.0 * sigma).ceil().max(1.0) as i64;
    let mut histogram = [0.0f64; ORIENTATION_BINS];
    for dy in -radius..=radius {
        for dx in -radius..=radius {
            let y = cy.round() as i64 + dy;
            let x = cx.round() as i64 + dx;
            if y < 1 || x < 1 || y >= h as i64 - 1 || x >= w as i64 - 1 {
                continue;
            }
            let (gx, gy) = gradient(image, y as usize, x as usize);
            let magnitude = gx.hypot(gy);
            if magnitude == 0.0 {
                continue;
            }
            let weight = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
            let angle = gy.atan2(gx).to_degrees().rem_euclid(360.0);
            let bin = ((angle / 360.0 * ORIENTATION_BINS as f64) as usize) % ORIENTATION_BINS;
            histogram[bin] += weight * magnitude;
        }
    }
    let (best, &peak) = histogram
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    if peak == 0.0 {
        return 0.0;
    }
    (best as f64 + 0.5) * 360.0 / ORIENTATION_BINS as f64
}

/// DoG extrema over the pyramid, with the mass-centroid fallback that
/// guarantees at least one keypoint for any non-blank image.
pub fn detect_keypoints(image: &Gray, config: &SiftConfig) -> Result<Vec<Keypoint>> {
    let total: f64 = image.sum();
    if total == 0.0 {
        return Err(Error::EmptyMask);
    }
    let (h, w) = image.dim();

    let mut keypoints = Vec::new();
    for (octave_index, octave) in build_pyramid(image, config).iter().enumerate() {
        let factor = (1 << octave_index) as f64;
        let (oh, ow) = octave.dogs[0].dim();
        for level in 1..octave.dogs.len() - 1 {
            for y in 1..oh - 1 {
                for x in 1..ow - 1 {
                    let v = octave.dogs[level][[y, x]];
                    if v.abs() < config.contrast_threshold
                        || !is_extremum(&octave.dogs, level, y, x)
                        || !passes_edge_test(&octave.dogs[level], y, x, config.edge_ratio)
                    {
                        continue;
                    }
                    let sigma = octave.sigmas[level];
                    let orientation = dominant_orientation(
                        &octave.gaussians[level],
                        x as f64,
                        y as f64,
                        1.5 * sigma,
                    );
                    keypoints.push(Keypoint {
                        x: x as f64 * factor,
                        y: y as f64 * factor,
                        scale: sigma * factor,
                        orientation,
                    });
                }
            }
        }
    }

    if keypoints.is_empty() {
        let mut sx = 0.0;
        let mut sy = 0.0;
        for ((y, x), &v) in image.indexed_iter() {
            sx += x as f64 * v;
            sy += y as f64 * v;
        }
        let (cx, cy) = (sx / total, sy / total);
        keypoints.push(Keypoint {
            x: cx.clamp(0.0, w as f64 - 1.0),
            y: cy.clamp(0.0, h as f64 - 1.0),
            scale: config.fallback_scale,
            orientation: dominant_orientation(image, cx, cy, config.fallback_scale),
        });
    }
    Ok(keypoints)
}

/// One 128-component descriptor per keypoint.
///
/// Gradients are sampled on a rotated `descriptor_window` grid around the
/// keypoint, weighted by magnitude and a centered Gaussian, binned over a
/// 4x4 spatial grid and 8 orientations with trilinear interpolation, then
/// L2-normalized with the usual 0.2 clamp. A windowful of zero gradients
/// yields the zero vector unchanged.
pub fn compute_descriptors(
    image: &Gray,
    keypoints: &[Keypoint],
    config: &SiftConfig,
) -> Result<DescriptorSet> {
    if keypoints.is_empty() {
        return Err(Error::EmptySample);
    }
    let (h, w) = image.dim();
    let window = config.descriptor_window as f64;
    let half = window / 2.0;
    let sigma = half;
    let cell = window / DESCRIPTOR_CELLS as f64;

    // gradient field once, sampled bilinearly below
    let mut gx_field: Gray = Array2::zeros((h, w));
    let mut gy_field: Gray = Array2::zeros((h, w));
    for y in 0..h {
        for x in 0..w {
            let (gx, gy) = gradient(image, y, x);
            gx_field[[y, x]] = gx;
            gy_field[[y, x]] = gy;
        }
    }

    let mut vectors = Vec::with_capacity(keypoints.len());
    for kp in keypoints {
        let rad = kp.orientation.to_radians();
        let (sin, cos) = (rad.sin(), rad.cos());
        let mut histogram =
            [0.0f64; DESCRIPTOR_CELLS * DESCRIPTOR_CELLS * DESCRIPTOR_ORIENT_BINS];

        let samples = config.descriptor_window;
        for a in 0..samples {
            for b in 0..samples {
                // window-local offsets, rotated into image coordinates
                let u = a as f64 + 0.5 - half;
                let v = b as f64 + 0.5 - half;
                let ix = kp.x + cos * u - sin * v;
                let iy = kp.y + sin * u + cos * v;
                let gx = bilinear_sample(&gx_field, ix, iy);
                let gy = bilinear_sample(&gy_field, ix, iy);
                let magnitude = gx.hypot(gy);
                if magnitude == 0.0 {
                    continue;
                }
                let weight = (-(u * u + v * v) / (2.0 * sigma * sigma)).exp() * magnitude;
                // gradient direction relative to the keypoint orientation
                let angle = (gy.atan2(gx) - rad).to_degrees().rem_euclid(360.0);

                let cu = u / cell + DESCRIPTOR_CELLS as f64 / 2.0 - 0.5;
                let cv = v / cell + DESCRIPTOR_CELLS as f64 / 2.0 - 0.5;
                let ob = angle / 360.0 * DESCRIPTOR_ORIENT_BINS as f64;

                let cu0 = cu.floor();
                let cv0 = cv.floor();
                let ob0 = ob.floor();
                let (fu, fv, fo) = (cu - cu0, cv - cv0, ob - ob0);
                for (du, wu) in [(0i64, 1.0 - fu), (1, fu)] {
                    let ui = cu0 as i64 + du;
                    if ui < 0 || ui >= DESCRIPTOR_CELLS as i64 || wu == 0.0 {
                        continue;
                    }
                    for (dv, wv) in [(0i64, 1.0 - fv), (1, fv)] {
                        let vi = cv0 as i64 + dv;
                        if vi < 0 || vi >= DESCRIPTOR_CELLS as i64 || wv == 0.0 {
                            continue;
                        }
                        for (do_, wo) in [(0i64, 1.0 - fo), (1, fo)] {
                            let oi =
                                (ob0 as i64 + do_).rem_euclid(DESCRIPTOR_ORIENT_BINS as i64);
                            let index = (ui as usize * DESCRIPTOR_CELLS + vi as usize)
                                * DESCRIPTOR_ORIENT_BINS
                                + oi as usize;
                            histogram[index] += weight * wu * wv * wo;
                        }
                    }
                }
            }
        }

        let mut descriptor = histogram.to_vec();
        let norm = descriptor.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for d in &mut descriptor {
                *d = (*d / norm).min(0.2);
            }
            let renorm = descriptor.iter().map(|v| v * v).sum::<f64>().sqrt();
            for d in &mut descriptor {
                *d /= renorm;
            }
        }
        vectors.push(descriptor);
    }
    DescriptorSet::new(DescriptorKind::Sift, vectors)
}

/// Detection and description in one call.
pub fn extract(image: &Gray, config: &SiftConfig) -> Result<DescriptorSet> {
    let keypoints = detect_keypoints(image, config)?;
    compute_descriptors(image, &keypoints, config)
}
