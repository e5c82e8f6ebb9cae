//! Glue from raw images to descriptor sets.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::dataset::{auto_segment, GloveFilterConfig, SegmentedImage};
use crate::descriptor::{DescriptorKind, DescriptorSet};
use crate::error::Result;
use crate::preprocess::{canonicalize, CanonicalHandImage};
use crate::probsom::SomConfig;
use crate::radon;
use crate::sift::{self, SiftConfig};

/// Everything the image-to-descriptor path needs, plus the SOM settings used
/// downstream. Serializable so runs can be reproduced from a config file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PipelineConfig {
    pub glove: GloveFilterConfig,
    pub descriptor: DescriptorKind,
    /// Feed the binary mask instead of grayscale intensities to the Radon
    /// transform.
    #[serde(default)]
    pub radon_on_mask: bool,
    #[serde(default)]
    pub sift: SiftConfig,
    pub som: SomConfig,
}

impl PipelineConfig {
    pub fn for_kind(descriptor: DescriptorKind) -> Self {
        PipelineConfig {
            glove: GloveFilterConfig::default(),
            descriptor,
            radon_on_mask: false,
            sift: SiftConfig::default(),
            som: SomConfig::defaults_for_kind(descriptor),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.glove.validate()?;
        self.som.validate()?;
        if self.som.vector_dim != self.descriptor.vector_dim() {
            return Err(crate::Error::validation(format!(
                "SOM vector_dim {} does not match {} vectors of dim {}",
                self.som.vector_dim,
                self.descriptor,
                self.descriptor.vector_dim()
            )));
        }
        Ok(())
    }
}

/// Segments (skipping the color filter for already black-background images)
/// and canonicalizes.
pub fn canonical_from_rgb(rgb: &RgbImage, glove: &GloveFilterConfig) -> Result<CanonicalHandImage> {
    let segmented = auto_segment(rgb, glove)?;
    canonicalize(&segmented)
}

/// Extracts the configured descriptor set from a canonical image.
pub fn descriptors_from_canonical(
    canonical: &CanonicalHandImage,
    config: &PipelineConfig,
) -> Result<DescriptorSet> {
    match config.descriptor {
        DescriptorKind::RadonLocal | DescriptorKind::RadonGlobal => {
            let input = if config.radon_on_mask {
                canonical.mask.mapv(|v| v as f64)
            } else {
                canonical.pixels.clone()
            };
            let sinogram = radon::radon_transform(&input)?;
            let descriptor = radon::resample_sinogram(&sinogram);
            match config.descriptor {
                DescriptorKind::RadonLocal => Ok(radon::to_local_rows(&descriptor)),
                _ => DescriptorSet::new(
                    DescriptorKind::RadonGlobal,
                    vec![radon::to_global(&descriptor)],
                ),
            }
        }
        DescriptorKind::Sift => sift::extract(&canonical.pixels, &config.sift),
    }
}

/// Full path from a color image to its descriptor set.
pub fn descriptors_from_rgb(rgb: &RgbImage, config: &PipelineConfig) -> Result<DescriptorSet> {
    let canonical = canonical_from_rgb(rgb, &config.glove)?;
    descriptors_from_canonical(&canonical, config)
}

/// Descriptor set straight from a segmented image, bypassing color filtering.
pub fn descriptors_from_segmented(
    segmented: &SegmentedImage,
    config: &PipelineConfig,
) -> Result<DescriptorSet> {
    let canonical = canonicalize(segmented)?;
    descriptors_from_canonical(&canonical, config)
}
