//! Evaluation protocol: ground truth from clean detections, size-matched
//! noise baselines and precision/recall with all-points AP.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::detector::{decode, Detection, GridDetector};
use crate::error::{Error, Result};
use crate::geometry::{Annotation, Patch, PatchConfig, PatchMeta};
use crate::image::{Image, Sample};
use crate::rng;
use crate::trainer::{apply_patch_to_dataset, TransformPolicy};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub const AP_METHOD: &str = "all-points";

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PrPoint {
    pub precision: f64,
    pub recall: f64,
    pub threshold: f64,
}

/// Detector outputs at `confidence` become the reference boxes.
pub fn derive_ground_truth<D: GridDetector + ?Sized>(
    detector: &D,
    samples: &[Sample<f32>],
    confidence: f64,
    nms_iou: f64,
) -> Result<Vec<Vec<Annotation>>> {
    samples
        .iter()
        .map(|s| {
            let out = detector.forward(&s.image)?;
            Ok(decode(&out, confidence, nms_iou).iter().map(|d| Annotation::new(d.class_id, d.bbox)).collect())
        })
        .collect()
}

/// I.i.d. uniform `[0, 1)` patch keyed by `seed`.
pub fn make_noise_patch(height: usize, width: usize, seed: u64) -> Result<Patch> {
    let mut r = rng::stream(seed, &[rng::TAG_NOISE_PATCH]);
    let mut p = Patch::uniform(height, width, &mut r)?;
    p.meta = PatchMeta { id: alloc::format!("noise-{height}x{width}-seed{seed}"), seed: Some(seed), ..Default::default() };
    Ok(p)
}

/// Global detection order: confidence descending, then image index, then
/// grid entry.
fn ranked(detections: &[Vec<Detection>]) -> Vec<(usize, &Detection)> {
    let mut all: Vec<(usize, &Detection)> =
        detections.iter().enumerate().flat_map(|(i, ds)| ds.iter().map(move |d| (i, d))).collect();
    all.sort_by(|a, b| {
        b.1.confidence
            .partial_cmp(&a.1.confidence)
            .unwrap_or(Ordering::Equal)
            .then(a.0.cmp(&b.0))
            .then(a.1.entry.cmp(&b.1.entry))
    });
    all
}

/// Unmatched ground-truth box of the same class with the highest IoU at or
/// above `match_iou`; ties go to the lower index.
pub(crate) fn best_match(det: &Detection, gts: &[Annotation], used: &[bool], match_iou: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, g) in gts.iter().enumerate() {
        if used[j] || g.class_id != det.class_id {
            continue;
        }
        let iou = det.bbox.iou(&g.bbox);
        if iou >= match_iou && best.map_or(true, |(_, b)| iou > b) {
            best = Some((j, iou));
        }
    }
    best.map(|(j, _)| j)
}

/// Sweeps the threshold over every distinct detection confidence, from high
/// to low, emitting one point per threshold. Detections are greedily matched
/// in rank order, each to at most one unmatched ground-truth box.
pub fn precision_recall(
    detections: &[Vec<Detection>],
    ground_truth: &[Vec<Annotation>],
    match_iou: f64,
) -> Result<Vec<PrPoint>> {
    if detections.len() != ground_truth.len() {
        return Err(Error::Shape(alloc::format!(
            "{} detection lists for {} ground-truth lists",
            detections.len(),
            ground_truth.len()
        )));
    }
    let total_gt: usize = ground_truth.iter().map(Vec::len).sum();
    if total_gt == 0 {
        return Err(Error::EmptyGroundTruth);
    }
    let mut used: Vec<Vec<bool>> = ground_truth.iter().map(|g| alloc::vec![false; g.len()]).collect();
    let order = ranked(detections);
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for (k, &(img, det)) in order.iter().enumerate() {
        match best_match(det, &ground_truth[img], &used[img], match_iou) {
            Some(j) => {
                used[img][j] = true;
                tp += 1;
            }
            None => fp += 1,
        }
        let last_of_threshold = order.get(k + 1).map_or(true, |(_, next)| next.confidence != det.confidence);
        if last_of_threshold {
            points.push(PrPoint {
                precision: tp as f64 / (tp + fp) as f64,
                recall: tp as f64 / total_gt as f64,
                threshold: det.confidence,
            });
        }
    }
    Ok(points)
}

/// Area under the precision envelope, where the precision at recall `r` is
/// the highest precision at any recall `>= r`.
pub fn average_precision(points: &[PrPoint]) -> f64 {
    let mut pts: Vec<(f64, f64)> = points.iter().map(|p| (p.recall, p.precision)).collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    let mut envelope = pts.clone();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i].1 = envelope[i].1.max(envelope[i + 1].1);
    }
    let mut ap = 0.0;
    let mut prev_r = 0.0;
    for (r, p) in envelope {
        ap += (r - prev_r) * p;
        prev_r = r;
    }
    ap.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "UPPERCASE"))]
pub enum Condition {
    Clean,
    Noise,
    Patch,
}

impl Condition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Condition::Clean => "CLEAN",
            Condition::Noise => "NOISE",
            Condition::Patch => "PATCH",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EvalConfig {
    pub match_iou: f64,
    pub gt_confidence: f64,
    pub nms_iou: f64,
    pub seed: u64,
    pub transform: TransformPolicy,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            match_iou: 0.5,
            gt_confidence: 0.4,
            nms_iou: 0.45,
            seed: 0,
            transform: TransformPolicy::Randomized(Default::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EvalReport {
    pub condition: Condition,
    pub ap: f64,
    pub ap_method: String,
    pub match_iou: f64,
    pub gt_confidence: f64,
    pub nms_iou: f64,
    pub seed: u64,
    pub num_images: usize,
    pub num_ground_truth: usize,
    pub patch_id: Option<String>,
    /// Geometry the patch was applied with.
    pub patch_config: Option<PatchConfig>,
    /// Geometry the patch was trained with, when known.
    pub trained_config: Option<PatchConfig>,
    pub pr_points: Vec<PrPoint>,
}

/// Composites the condition's patch (none for CLEAN) onto every annotated
/// object, runs the detector, decodes without a confidence floor and scores
/// against `ground_truth`. NOISE and PATCH runs with equal seeds, geometry and
/// patch size see identical transforms.
pub fn evaluate_condition<D: GridDetector + ?Sized>(
    detector: &D,
    samples: &[Sample<f32>],
    ground_truth: &[Vec<Annotation>],
    condition: Condition,
    patch: Option<&Patch>,
    patch_config: &PatchConfig,
    config: &EvalConfig,
) -> Result<EvalReport> {
    let patched;
    let images: Vec<&Image<f32>> = match (condition, patch) {
        (Condition::Clean, _) => samples.iter().map(|s| &s.image).collect(),
        (_, Some(p)) => {
            patched = apply_patch_to_dataset(samples, p, patch_config, &config.transform, config.seed)?;
            patched.iter().map(|s| &s.image).collect()
        }
        (_, None) => {
            return Err(Error::InvalidConfig(alloc::format!("{} condition needs a patch", condition.as_str())));
        }
    };
    let detections = images
        .iter()
        .map(|im| Ok(decode(&detector.forward(im)?, 0.0, config.nms_iou)))
        .collect::<Result<Vec<_>>>()?;
    let pr_points = precision_recall(&detections, ground_truth, config.match_iou)?;
    let with_patch = condition != Condition::Clean;
    Ok(EvalReport {
        condition,
        ap: average_precision(&pr_points),
        ap_method: AP_METHOD.into(),
        match_iou: config.match_iou,
        gt_confidence: config.gt_confidence,
        nms_iou: config.nms_iou,
        seed: config.seed,
        num_images: samples.len(),
        num_ground_truth: ground_truth.iter().map(Vec::len).sum(),
        patch_id: patch.filter(|_| with_patch).map(|p| p.meta.id.clone()),
        patch_config: with_patch.then_some(*patch_config),
        trained_config: patch.filter(|_| with_patch).and_then(|p| p.meta.config),
        pr_points,
    })
}

/// Evaluates a patch trained under `trained` with the `applied` geometry.
#[allow(clippy::too_many_arguments)]
pub fn cross_config_eval<D: GridDetector + ?Sized>(
    detector: &D,
    samples: &[Sample<f32>],
    ground_truth: &[Vec<Annotation>],
    patch: &Patch,
    trained: &PatchConfig,
    applied: &PatchConfig,
    config: &EvalConfig,
) -> Result<EvalReport> {
    let mut report =
        evaluate_condition(detector, samples, ground_truth, Condition::Patch, Some(patch), applied, config)?;
    report.trained_config = Some(*trained);
    Ok(report)
}
