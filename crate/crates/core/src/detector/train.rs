//! Supervised training of the reference detector.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::toy::{sigmoid, ToyDetector, ToyDetectorConfig, STRIDE};
use super::{decode, GridDetector};
use crate::error::{Error, Result};
use crate::eval;
use crate::geometry::{Annotation, BBox};
use crate::image::{Image, Sample};
use crate::optim::Adam;
use crate::rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DetectorTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub lambda_coord: f32,
    pub lambda_noobj: f32,
    /// Random flips and quarter turns.
    pub augment: bool,
    /// Held-out AP (at confidence 0.4, IoU 0.5) below which training is
    /// reported as not converged.
    pub min_ap: f64,
}

impl Default for DetectorTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 8,
            learning_rate: 2e-3,
            seed: 0,
            lambda_coord: 5.0,
            lambda_noobj: 1.0,
            augment: true,
            min_ap: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DetectorEpoch {
    pub epoch: usize,
    pub loss: f64,
    pub obj_loss: f64,
    pub box_loss: f64,
}

#[derive(Debug, Clone)]
pub struct DetectorTrainReport {
    pub detector: ToyDetector,
    pub log: Vec<DetectorEpoch>,
    pub heldout_ap: Option<f64>,
    pub converged: bool,
}

/// Applies one of the 8 symmetries of the square (`op & 3` clockwise quarter
/// turns, then a horizontal flip if `op & 4`) to a square sample.
pub fn augment_dihedral(sample: &Sample<f32>, op: u8) -> Sample<f32> {
    let s = sample.image.width();
    debug_assert_eq!(s, sample.image.height());
    let turns = op & 3;
    let flip = op & 4 != 0;
    let map_px = |mut x: usize, mut y: usize| {
        for _ in 0..turns {
            (x, y) = (s - 1 - y, x);
        }
        if flip {
            x = s - 1 - x;
        }
        (x, y)
    };
    let mut image = Image::new(s, s);
    for c in 0..3 {
        for y in 0..s {
            for x in 0..s {
                let (nx, ny) = map_px(x, y);
                image.set(c, nx, ny, sample.image.get(c, x, y));
            }
        }
    }
    let sf = s as f64;
    let annotations = sample
        .annotations
        .iter()
        .map(|a| {
            let mut b = a.bbox;
            for _ in 0..turns {
                b = BBox::new(sf - b.cy, b.cx, b.h, b.w);
            }
            if flip {
                b.cx = sf - b.cx;
            }
            Annotation::new(a.class_id, b)
        })
        .collect();
    Sample { id: sample.id.clone(), image, annotations }
}

struct ImageLoss {
    obj: f64,
    boxes: f64,
    cls: f64,
    d_raw: Vec<f32>,
}

fn image_loss(cfg: &ToyDetectorConfig, raw: &[f32], anns: &[Annotation], t: &DetectorTrainConfig) -> Result<ImageLoss> {
    let g = cfg.grid();
    let p = g * g;
    let nc = cfg.num_classes;
    let mut targets: Vec<Option<&Annotation>> = vec![None; p];
    for a in anns {
        if a.class_id as usize >= nc {
            return Err(Error::InvalidConfig(alloc::format!(
                "annotation class {} outside detector's {} classes",
                a.class_id,
                nc
            )));
        }
        let gx = ((a.bbox.cx / STRIDE as f64).max(0.0) as usize).min(g - 1);
        let gy = ((a.bbox.cy / STRIDE as f64).max(0.0) as usize).min(g - 1);
        let slot = &mut targets[gy * g + gx];
        if slot.map_or(true, |b| a.bbox.area() > b.bbox.area()) {
            *slot = Some(a);
        }
    }
    let mut d = vec![0.0f32; cfg.head_channels() * p];
    let (mut obj, mut boxes, mut cls) = (0.0f64, 0.0f64, 0.0f64);
    let lc = t.lambda_coord;
    for (e, target) in targets.iter().enumerate() {
        let s = sigmoid(raw[4 * p + e]).clamp(1e-7, 1.0 - 1e-7);
        match target {
            None => {
                obj -= (t.lambda_noobj * libm::logf(1.0 - s)) as f64;
                d[4 * p + e] = t.lambda_noobj * s;
            }
            Some(a) => {
                obj -= libm::logf(s) as f64;
                d[4 * p + e] = s - 1.0;
                let (gx, gy) = ((e % g) as f64, (e / g) as f64);
                let sx = (a.bbox.cx / STRIDE as f64 - gx).clamp(0.0, 1.0) as f32;
                let sy = (a.bbox.cy / STRIDE as f64 - gy).clamp(0.0, 1.0) as f32;
                for (ch, target) in [(0, sx), (1, sy)] {
                    let v = sigmoid(raw[ch * p + e]);
                    boxes += (lc * (v - target) * (v - target)) as f64;
                    d[ch * p + e] = lc * 2.0 * (v - target) * v * (1.0 - v);
                }
                let tw = libm::log(a.bbox.w / cfg.anchor.0).clamp(-4.0, 4.0) as f32;
                let th = libm::log(a.bbox.h / cfg.anchor.1).clamp(-4.0, 4.0) as f32;
                for (ch, target) in [(2, tw), (3, th)] {
                    let v = raw[ch * p + e];
                    boxes += (lc * (v - target) * (v - target)) as f64;
                    d[ch * p + e] = lc * 2.0 * (v - target);
                }
                let m = (0..nc).map(|c| raw[(5 + c) * p + e]).fold(f32::NEG_INFINITY, f32::max);
                let z: f32 = (0..nc).map(|c| libm::expf(raw[(5 + c) * p + e] - m)).sum();
                for c in 0..nc {
                    let pc = libm::expf(raw[(5 + c) * p + e] - m) / z;
                    let is_t = c == a.class_id as usize;
                    if is_t {
                        cls -= libm::logf(pc.max(1e-12)) as f64;
                    }
                    d[(5 + c) * p + e] = pc - if is_t { 1.0 } else { 0.0 };
                }
            }
        }
    }
    Ok(ImageLoss { obj, boxes, cls, d_raw: d })
}

/// AP of `detector` on annotated samples with detections kept at
/// confidence 0.4, matched at IoU 0.5.
pub fn heldout_ap<D: GridDetector + ?Sized>(detector: &D, samples: &[Sample<f32>]) -> Result<f64> {
    let mut dets = Vec::with_capacity(samples.len());
    let mut gts = Vec::with_capacity(samples.len());
    for s in samples {
        dets.push(decode(&detector.forward(&s.image)?, 0.4, 0.45));
        gts.push(s.annotations.clone());
    }
    let curve = eval::precision_recall(&dets, &gts, 0.5)?;
    Ok(eval::average_precision(&curve))
}

/// Trains a fresh [`ToyDetector`] on `train`. With a held-out set the report
/// carries its AP and whether it reached `config.min_ap`.
pub fn train_toy_detector(
    train: &[Sample<f32>],
    heldout: Option<&[Sample<f32>]>,
    model: ToyDetectorConfig,
    config: &DetectorTrainConfig,
    on_epoch: &mut dyn FnMut(&DetectorEpoch),
) -> Result<DetectorTrainReport> {
    if config.batch_size == 0 || !(config.learning_rate >= 0.0) {
        return Err(Error::InvalidConfig("batch_size must be >= 1 and learning_rate >= 0".into()));
    }
    if train.iter().all(|s| s.annotations.is_empty()) {
        return Err(Error::NoTargets);
    }
    let mut det = ToyDetector::new(model, config.seed)?;
    let mut opt = Adam::new(det.params().len(), config.learning_rate);
    let mut grad = vec![0.0f32; det.params().len()];
    let mut log = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(config.seed, &[rng::TAG_SHUFFLE, epoch as u64]));
        let (mut sum_obj, mut sum_box, mut sum_all) = (0.0, 0.0, 0.0);
        for batch in order.chunks(config.batch_size) {
            grad.fill(0.0);
            for &i in batch {
                let aug;
                let sample = if config.augment {
                    let op = rng::stream(config.seed, &[rng::TAG_AUGMENT, epoch as u64, i as u64]).gen_range(0..8u8);
                    aug = augment_dihedral(&train[i], op);
                    &aug
                } else {
                    &train[i]
                };
                let caches = det.run(&sample.image)?;
                let l = image_loss(det.config(), &caches.last().expect("head").out, &sample.annotations, config)?;
                sum_obj += l.obj;
                sum_box += l.boxes;
                sum_all += l.obj + l.boxes + l.cls;
                det.backward(&caches, l.d_raw, Some(&mut grad), false);
            }
            let inv = 1.0 / batch.len() as f32;
            grad.iter_mut().for_each(|g| *g *= inv);
            opt.update(det.params_mut(), &grad);
        }
        if !sum_all.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let n = train.len() as f64;
        let rec = DetectorEpoch { epoch, loss: sum_all / n, obj_loss: sum_obj / n, box_loss: sum_box / n };
        on_epoch(&rec);
        log.push(rec);
    }

    let heldout_ap = heldout.map(|h| heldout_ap(&det, h)).transpose()?;
    let converged = heldout_ap.map_or(true, |ap| ap >= config.min_ap);
    Ok(DetectorTrainReport { detector: det, log, heldout_ap, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dihedral_keeps_boxes_on_pixels() {
        // A bright 4x6 block; its box must follow it under every symmetry.
        let s = 32;
        let img = Image::<f32>::from_fn(s, s, |_, x, y| if (4..8).contains(&x) && (10..16).contains(&y) { 1.0 } else { 0.0 });
        let sample = Sample {
            id: "t".into(),
            image: img,
            annotations: vec![Annotation::new(0, BBox::from_corners(4.0, 10.0, 8.0, 16.0))],
        };
        for op in 0..8 {
            let a = augment_dihedral(&sample, op);
            let b = a.annotations[0].bbox;
            let lit: Vec<(usize, usize)> =
                (0..s).flat_map(|y| (0..s).map(move |x| (x, y))).filter(|&(x, y)| a.image.get(0, x, y) > 0.5).collect();
            let x0 = lit.iter().map(|p| p.0).min().unwrap() as f64;
            let x1 = lit.iter().map(|p| p.0).max().unwrap() as f64 + 1.0;
            let y0 = lit.iter().map(|p| p.1).min().unwrap() as f64;
            let y1 = lit.iter().map(|p| p.1).max().unwrap() as f64 + 1.0;
            assert_eq!((b.x0(), b.y0(), b.x1(), b.y1()), (x0, y0, x1, y1), "op {op}");
        }
    }

    #[test]
    fn zero_epochs_returns_untrained_weights() {
        let sample = Sample {
            id: "a".into(),
            image: Image::new(64, 64),
            annotations: vec![Annotation::new(0, BBox::new(20.0, 20.0, 10.0, 10.0))],
        };
        let model = ToyDetectorConfig { input_size: 64, channels: [4; 6], ..Default::default() };
        let cfg = DetectorTrainConfig { epochs: 0, ..Default::default() };
        let rep = train_toy_detector(core::slice::from_ref(&sample), None, model.clone(), &cfg, &mut |_| {}).unwrap();
        assert_eq!(rep.detector, ToyDetector::new(model, 0).unwrap());
        assert!(rep.log.is_empty());
    }

    #[test]
    fn no_targets_rejected() {
        let sample = Sample { id: "a".into(), image: Image::new(64, 64), annotations: vec![] };
        let model = ToyDetectorConfig { input_size: 64, channels: [4; 6], ..Default::default() };
        let err = train_toy_detector(&[sample], None, model, &Default::default(), &mut |_| {}).unwrap_err();
        assert_eq!(err, Error::NoTargets);
    }
}
