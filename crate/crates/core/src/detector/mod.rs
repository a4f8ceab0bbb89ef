//! Grid-output detectors.
//!
//! A detector maps an image to a grid of cells; each cell carries `anchors`
//! predictions of a box, an objectness score and a class distribution.
//! [`GridDetector`] is the adapter contract the patch trainer attacks and the
//! evaluator queries. [`ToyDetector`] is a small fully convolutional
//! reference implementation.

mod decode;
mod layers;
mod toy;
mod train;

use alloc::vec;
use alloc::vec::Vec;

pub use decode::{decode, decode_with, DecodeOptions};
pub use toy::{ToyDetector, ToyDetectorConfig, ARCHITECTURE_TAG};
pub use train::{augment_dihedral, heldout_ap, train_toy_detector, DetectorEpoch, DetectorTrainConfig, DetectorTrainReport};

use crate::error::Result;
use crate::geometry::BBox;
use crate::image::Image;

/// Decoded per-cell predictions, before thresholding.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorOutput {
    pub grid_w: usize,
    pub grid_h: usize,
    pub anchors: usize,
    pub num_classes: usize,
    /// Boxes in input-image pixels, indexed by entry `(gy * grid_w + gx) * anchors + a`.
    pub boxes: Vec<BBox>,
    pub objectness: Vec<f32>,
    /// `len() * num_classes` probabilities; each entry's row sums to 1.
    pub class_probs: Vec<f32>,
}

impl DetectorOutput {
    pub fn len(&self) -> usize {
        self.objectness.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objectness.is_empty()
    }

    pub fn class_row(&self, entry: usize) -> &[f32] {
        &self.class_probs[entry * self.num_classes..(entry + 1) * self.num_classes]
    }

    /// Most likely class of an entry; ties go to the lower class id.
    pub fn best_class(&self, entry: usize) -> (usize, f32) {
        let mut best = (0, f32::NEG_INFINITY);
        for (c, &p) in self.class_row(entry).iter().enumerate() {
            if p > best.1 {
                best = (c, p);
            }
        }
        best
    }

    pub fn max_objectness(&self) -> f32 {
        self.objectness.iter().copied().fold(0.0, f32::max)
    }
}

/// Gradient of a scalar loss with respect to a [`DetectorOutput`]'s scores.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputGrad {
    pub objectness: Vec<f32>,
    pub class_probs: Vec<f32>,
}

impl OutputGrad {
    pub fn zeros_like(output: &DetectorOutput) -> Self {
        Self { objectness: vec![0.0; output.len()], class_probs: vec![0.0; output.class_probs.len()] }
    }
}

/// A thresholded, class-assigned prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Detection {
    pub bbox: BBox,
    pub class_id: u32,
    /// Objectness times class probability.
    pub confidence: f64,
    /// Grid entry the detection was decoded from.
    pub entry: usize,
}

/// The interface an attacked detector exposes. Implementations must be pure
/// functions of their (frozen) weights.
pub trait GridDetector {
    /// Required `(width, height)` of input images.
    fn input_size(&self) -> (usize, usize);

    fn num_classes(&self) -> usize;

    fn forward(&self, image: &Image<f32>) -> Result<DetectorOutput>;

    fn forward_batch(&self, images: &[Image<f32>]) -> Result<Vec<DetectorOutput>> {
        images.iter().map(|im| self.forward(im)).collect()
    }

    /// Runs the forward pass, asks `loss` for the output gradient and
    /// backpropagates it to the input pixels. Weights are not touched.
    fn input_gradient(
        &self,
        image: &Image<f32>,
        loss: &mut dyn FnMut(&DetectorOutput) -> OutputGrad,
    ) -> Result<(DetectorOutput, Image<f32>)>;

    /// Checksum of the weights.
    fn fingerprint(&self) -> u64;
}
