use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::layers::{Conv2d, ConvCache};
use super::{DetectorOutput, GridDetector, OutputGrad};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::image::Image;
use crate::rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Version tag written alongside serialized weights.
pub const ARCHITECTURE_TAG: &str = "toy-fcn-v2";

pub const STRIDE: usize = 32;
const MAX_LOG_SCALE: f32 = 4.0;

/// Shape of the reference detector: five stride-2 3x3 convolutions, one
/// stride-1 3x3 convolution and a 1x1 head, for a total stride of 32 and one
/// anchor per cell.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ToyDetectorConfig {
    /// Square input side in pixels; a multiple of 32.
    pub input_size: usize,
    pub num_classes: usize,
    /// Anchor `(width, height)` in pixels.
    pub anchor: (f64, f64),
    pub channels: [usize; 6],
}

impl Default for ToyDetectorConfig {
    fn default() -> Self {
        Self { input_size: 256, num_classes: 1, anchor: (72.0, 72.0), channels: [8, 16, 32, 32, 64, 64] }
    }
}

impl ToyDetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.input_size % STRIDE != 0 {
            return Err(Error::InvalidConfig(alloc::format!(
                "input size must be a positive multiple of {STRIDE}, got {}",
                self.input_size
            )));
        }
        if self.num_classes == 0 || self.channels.contains(&0) {
            return Err(Error::InvalidConfig("class and channel counts must be positive".into()));
        }
        if !(self.anchor.0 > 0.0 && self.anchor.1 > 0.0) {
            return Err(Error::InvalidConfig("anchor must be positive".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> usize {
        self.input_size / STRIDE
    }

    /// Raw head channels per anchor: 4 box terms, objectness, class logits.
    pub fn head_channels(&self) -> usize {
        5 + self.num_classes
    }

    fn layers(&self) -> Vec<Conv2d> {
        let [c1, c2, c3, c4, c5, c6] = self.channels;
        let specs = [
            (3, c1, 3, 2, 1, true),
            (c1, c2, 3, 2, 1, true),
            (c2, c3, 3, 2, 1, true),
            (c3, c4, 3, 2, 1, true),
            (c4, c5, 3, 2, 1, true),
            (c5, c6, 3, 1, 1, true),
            (c6, self.head_channels(), 1, 1, 0, false),
        ];
        let mut off = 0;
        specs
            .iter()
            .map(|&(cin, cout, k, stride, pad, leaky)| {
                let mut l = Conv2d { cin, cout, k, stride, pad, leaky, w_off: off, b_off: 0 };
                off += l.weight_len();
                l.b_off = off;
                off += cout;
                l
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.weight_len() + l.cout).sum()
    }
}

/// Small fully convolutional single-anchor grid detector.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyDetector {
    config: ToyDetectorConfig,
    layers: Vec<Conv2d>,
    params: Vec<f32>,
}

#[inline]
pub(crate) fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + libm::expf(-x))
}

impl ToyDetector {
    /// Fresh weights: scaled uniform init for hidden layers, a small head and
    /// an objectness bias that starts every cell near zero.
    pub fn new(config: ToyDetectorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layers = config.layers();
        let mut params = vec![0.0f32; config.param_count()];
        let mut r = rng::stream(seed, &[rng::TAG_DETECTOR_INIT]);
        let head = layers.len() - 1;
        for (i, l) in layers.iter().enumerate() {
            let bound = libm::sqrtf(6.0 / l.patch_len() as f32) * if i == head { 0.1 } else { 1.0 };
            for w in &mut params[l.w_off..l.w_off + l.weight_len()] {
                *w = bound * (2.0 * r.gen::<f32>() - 1.0);
            }
        }
        params[layers[head].b_off + 4] = -4.0;
        Ok(Self { config, layers, params })
    }

    pub fn from_params(config: ToyDetectorConfig, params: Vec<f32>) -> Result<Self> {
        config.validate()?;
        if params.len() != config.param_count() {
            return Err(Error::Shape(alloc::format!(
                "expected {} parameters, got {}",
                config.param_count(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig("non-finite detector weight".into()));
        }
        let layers = config.layers();
        Ok(Self { config, layers, params })
    }

    pub fn config(&self) -> &ToyDetectorConfig {
        &self.config
    }

    pub fn params(&self) -> &[f32] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f32] {
        &mut self.params
    }

    fn check_input(&self, image: &Image<f32>) -> Result<()> {
        let s = self.config.input_size;
        if image.width() != s || image.height() != s {
            return Err(Error::InputSize {
                expected_width: s,
                expected_height: s,
                width: image.width(),
                height: image.height(),
            });
        }
        Ok(())
    }

    /// Forward pass keeping every layer's activations; the last cache holds
    /// the raw head output.
    pub(crate) fn run(&self, image: &Image<f32>) -> Result<Vec<ConvCache>> {
        self.check_input(image)?;
        let s = self.config.input_size;
        let mut x: Vec<f32> = image.data().iter().map(|v| v - 0.5).collect();
        let (mut h, mut w) = (s, s);
        let mut caches = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            let cache = l.forward(&self.params, &x, h, w);
            (h, w) = (cache.out_h, cache.out_w);
            x = cache.out.clone();
            caches.push(cache);
        }
        Ok(caches)
    }

    pub(crate) fn decode_raw(&self, raw: &[f32]) -> DetectorOutput {
        let g = self.config.grid();
        let p = g * g;
        let nc = self.config.num_classes;
        let (aw, ah) = self.config.anchor;
        let mut boxes = Vec::with_capacity(p);
        let mut objectness = Vec::with_capacity(p);
        let mut class_probs = Vec::with_capacity(p * nc);
        for cell in 0..p {
            let at = |ch: usize| raw[ch * p + cell];
            let (gx, gy) = ((cell % g) as f64, (cell / g) as f64);
            let cx = (gx + sigmoid(at(0)) as f64) * STRIDE as f64;
            let cy = (gy + sigmoid(at(1)) as f64) * STRIDE as f64;
            let bw = aw * libm::expf(at(2).clamp(-MAX_LOG_SCALE, MAX_LOG_SCALE)) as f64;
            let bh = ah * libm::expf(at(3).clamp(-MAX_LOG_SCALE, MAX_LOG_SCALE)) as f64;
            boxes.push(BBox::new(cx, cy, bw, bh));
            objectness.push(sigmoid(at(4)));
            let m = (0..nc).map(|c| at(5 + c)).fold(f32::NEG_INFINITY, f32::max);
            let start = class_probs.len();
            let mut z = 0.0;
            for c in 0..nc {
                let e = libm::expf(at(5 + c) - m);
                z += e;
                class_probs.push(e);
            }
            for v in &mut class_probs[start..] {
                *v /= z;
            }
        }
        DetectorOutput { grid_w: g, grid_h: g, anchors: 1, num_classes: nc, boxes, objectness, class_probs }
    }

    /// Maps a score gradient onto the raw head channels.
    pub(crate) fn raw_grad_from_scores(&self, out: &DetectorOutput, grad: &OutputGrad) -> Vec<f32> {
        let p = out.len();
        let nc = self.config.num_classes;
        let mut d = vec![0.0f32; self.config.head_channels() * p];
        for e in 0..p {
            let s = out.objectness[e];
            d[4 * p + e] = grad.objectness[e] * s * (1.0 - s);
            let probs = out.class_row(e);
            let gs = &grad.class_probs[e * nc..(e + 1) * nc];
            let dot: f32 = probs.iter().zip(gs).map(|(a, b)| a * b).sum();
            for c in 0..nc {
                d[(5 + c) * p + e] = probs[c] * (gs[c] - dot);
            }
        }
        d
    }

    /// Backpropagates `d_raw` through every layer.
    pub(crate) fn backward(
        &self,
        caches: &[ConvCache],
        d_raw: Vec<f32>,
        mut grad_params: Option<&mut [f32]>,
        want_input: bool,
    ) -> Option<Vec<f32>> {
        let mut g = d_raw;
        for (i, (l, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            let need_input = i > 0 || want_input;
            match l.backward(&self.params, cache, g, grad_params.as_deref_mut(), need_input) {
                Some(next) => g = next,
                None => return None,
            }
        }
        Some(g)
    }
}

impl GridDetector for ToyDetector {
    fn input_size(&self) -> (usize, usize) {
        (self.config.input_size, self.config.input_size)
    }

    fn num_classes(&self) -> usize {
        self.config.num_classes
    }

    fn forward(&self, image: &Image<f32>) -> Result<DetectorOutput> {
        let caches = self.run(image)?;
        Ok(self.decode_raw(&caches.last().expect("head layer").out))
    }

    fn input_gradient(
        &self,
        image: &Image<f32>,
        loss: &mut dyn FnMut(&DetectorOutput) -> OutputGrad,
    ) -> Result<(DetectorOutput, Image<f32>)> {
        let caches = self.run(image)?;
        let out = self.decode_raw(&caches.last().expect("head layer").out);
        let grad = loss(&out);
        let d_raw = self.raw_grad_from_scores(&out, &grad);
        let gx = self.backward(&caches, d_raw, None, true).expect("input gradient requested");
        let s = self.config.input_size;
        Ok((out, Image::from_planar(s, s, gx)?))
    }

    fn fingerprint(&self) -> u64 {
        // FNV-1a over the weight bit patterns.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for p in &self.params {
            for b in p.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}
