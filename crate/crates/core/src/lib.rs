//! Adversarial camouflage patches for grid-output object detectors.
//!
//! This crate holds the numerical core and is `no_std` (it needs `alloc`):
//!
//! - [`geometry`]: patches, patch configurations, random physical transforms
//!   and differentiable compositing of a patch onto an image.
//! - [`losses`]: non-printability, total variation, colorfulness and
//!   objectness losses with analytic gradients.
//! - [`detector`]: the grid detector interface, decoding with NMS and a small
//!   trainable convolutional reference detector.
//! - [`trainer`]: the patch optimization loop.
//! - [`eval`]: ground truth from clean detections, noise baselines and
//!   precision/recall with average precision.
//! - [`ingest`]: tiling of large images and source-level train/test splits.
//! - [`synth`]: a procedural generator of aerial-style scenes with planes.
//!
//! File formats, the command line and plotting live in the `aerocamo` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod detector;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod image;
pub mod ingest;
pub mod losses;
pub mod optim;
pub mod rng;
pub mod synth;
pub mod trainer;

pub use detector::{
    decode, Detection, DetectorOutput, GridDetector, OutputGrad, ToyDetector, ToyDetectorConfig,
};
pub use error::{Error, Result};
pub use eval::{Condition, EvalReport, PrPoint};
pub use geometry::{
    Annotation, BBox, Patch, PatchConfig, PatchMeta, Placement, PlacementMode, TransformRanges,
    TransformSample,
};
pub use image::{Image, Sample, Scalar};
pub use losses::{LossBreakdown, LossWeights, PrintableColorSet};
pub use trainer::{TrainConfig, TrainOutcome};
