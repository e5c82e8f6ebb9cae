//! Handshape classification pipeline.
//!
//! The stages, each usable on its own:
//!
//! 1. **dataset** — manifest-driven corpus loading and glove-color
//!    segmentation of the hand.
//! 2. **preprocess** — geometric canonicalization: largest component,
//!    principal-axis derotation, upright correction, aspect-preserving
//!    resampling to 128x128, contour extraction.
//! 3. **radon** — discrete Radon transform of the canonical image and the
//!    32x32 descriptor derived from it (one global vector or 32 row vectors).
//! 4. **sift** — gradient-histogram keypoint descriptors as an alternative
//!    variable-cardinality feature set.
//! 5. **probsom** — Kohonen map trained on descriptor vectors, weighted with
//!    per-neuron class ratios, classifying a vector set by aggregated ratio.
//! 6. **eval** — stratified random and leave-one-subject-out protocols with
//!    per-class, confusion, and top-k reporting.
//!
//! [`pipeline`] wires stages 1-4 together; [`synth`] renders synthetic hand
//! silhouettes for tests and demos.

pub mod dataset;
pub mod descriptor;
pub mod error;
pub mod eval;
pub mod grid;
pub mod imageio;
pub mod pipeline;
pub mod preprocess;
pub mod probsom;
pub mod radon;
pub mod sift;
pub mod synth;

pub use error::{Error, Result};

/// Number of handshape classes scored by the classifier.
pub const NUM_CLASSES: usize = 16;
/// Number of subjects in a complete corpus.
pub const NUM_SUBJECTS: usize = 10;
/// Repetitions per (class, subject) pair in a complete corpus.
pub const NUM_REPETITIONS: usize = 5;
/// Side length of the canonical hand image.
pub const CANONICAL_SIZE: usize = 128;
