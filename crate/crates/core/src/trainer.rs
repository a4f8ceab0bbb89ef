//! Patch optimization: composite the current patch onto every annotated
//! object in a batch, push the detector's peak objectness back through the
//! detector and the warp onto the patch pixels, add the regularizer
//! gradients, take an Adam step and clamp to `[0, 1]`. Detector weights are
//! only ever read.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::detector::{GridDetector, OutputGrad};
use crate::error::{Error, Result};
use crate::geometry::{
    composite_patch_in_place, patch_placements, sample_transform, Patch, PatchConfig, PatchMeta, TransformRanges,
    TransformSample,
};
use crate::image::Sample;
use crate::losses::{
    objectness_peak, regularizer_grad, zero_grad, LossBreakdown, LossWeights, ObjectnessMode, PrintableColorSet,
};
use crate::optim::{Adam, Plateau, PlateauConfig};
use crate::rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// How transforms are chosen when a patch is applied.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TransformPolicy {
    /// One sampled transform per placement.
    Randomized(TransformRanges),
    /// Axis-aligned at nominal scale, no jitter.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    /// `(height, width)` of the patch pixel grid.
    pub patch_size: (usize, usize),
    pub patch_config: PatchConfig,
    pub weights: LossWeights,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub transform_ranges: TransformRanges,
    pub checkpoint_every: usize,
    pub plateau: PlateauConfig,
    pub objectness: ObjectnessMode,
    /// Only annotations of this class receive the patch; `None` for all.
    pub target_class: Option<u32>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            patch_size: (32, 32),
            patch_config: PatchConfig::small(),
            weights: LossWeights::default(),
            epochs: 200,
            batch_size: 8,
            learning_rate: 0.03,
            seed: 0,
            transform_ranges: TransformRanges::default(),
            checkpoint_every: 10,
            plateau: PlateauConfig::default(),
            objectness: ObjectnessMode::Raw,
            target_class: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!("learning_rate must be >= 0, got {}", self.learning_rate)));
        }
        let (h, w) = self.patch_size;
        if h < 2 || w < 2 {
            return Err(Error::PatchTooSmall { height: h, width: w });
        }
        self.patch_config.validate()?;
        self.weights.validate()?;
        self.transform_ranges.validate()
    }
}

/// Per-epoch means of the unweighted loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_obj: f64,
    pub l_nps: f64,
    pub l_tv: f64,
    pub l_sal: f64,
    pub total: f64,
    pub lr: f64,
}

/// Everything needed to resume a run after `epoch` completed epochs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TrainerState {
    pub epoch: usize,
    pub patch: Patch,
    pub adam: Adam,
    pub plateau: Plateau,
    pub best_obj: f64,
    pub best_patch: Patch,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub patch: Patch,
    /// Patch after the epoch with the lowest mean objectness.
    pub best_patch: Patch,
    pub log: Vec<EpochRecord>,
    pub detector_fingerprint: u64,
}

fn is_target(class_id: u32, target: Option<u32>) -> bool {
    target.map_or(true, |t| t == class_id)
}

/// Composites `patch` onto every target annotation of `sample`, drawing
/// transforms from `transforms`. Returns the traces in application order.
fn composite_sample(
    sample: &Sample<f32>,
    patch: &Patch,
    config: &PatchConfig,
    target: Option<u32>,
    mut transform: impl FnMut() -> Result<TransformSample>,
) -> Result<(Sample<f32>, Vec<crate::geometry::CompositeTrace>)> {
    let mut out = sample.clone();
    let mut traces = Vec::new();
    for ann in sample.annotations.iter().filter(|a| is_target(a.class_id, target)) {
        for pl in patch_placements(ann, config) {
            let t = transform()?;
            traces.push(composite_patch_in_place(&mut out.image, patch, &pl, &t));
        }
    }
    Ok((out, traces))
}

/// Applies `patch` to every annotated object of every sample. The random
/// stream for sample `i` depends only on `(seed, i)`, so different patches of
/// the same size see identical placements and transforms.
pub fn apply_patch_to_dataset(
    samples: &[Sample<f32>],
    patch: &Patch,
    config: &PatchConfig,
    policy: &TransformPolicy,
    seed: u64,
) -> Result<Vec<Sample<f32>>> {
    config.validate()?;
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut r = rng::stream(seed, &[rng::TAG_TRANSFORM, u64::MAX, i as u64]);
            let (out, _) = composite_sample(s, patch, config, None, || match policy {
                TransformPolicy::Identity => Ok(TransformSample::identity()),
                TransformPolicy::Randomized(ranges) => sample_transform(&mut r, ranges),
            })?;
            Ok(out)
        })
        .collect()
}

/// Initial state for a fresh run: uniform random patch keyed by the seed.
pub fn initial_state(config: &TrainConfig) -> Result<TrainerState> {
    let (h, w) = config.patch_size;
    let patch = Patch::random(h, w, config.seed)?;
    Ok(TrainerState {
        epoch: 0,
        adam: Adam::new(patch.len(), config.learning_rate),
        plateau: Plateau::new(config.plateau),
        best_obj: f64::INFINITY,
        best_patch: patch.clone(),
        patch,
    })
}

fn stamp(patch: &mut Patch, config: &TrainConfig, epoch: usize) {
    patch.meta = PatchMeta {
        id: format!("patch-{}-seed{}-e{}", config.patch_config.label(), config.seed, epoch),
        config: Some(config.patch_config),
        weights: Some(config.weights),
        run_id: patch.meta.run_id.clone(),
        epoch: Some(epoch),
        seed: Some(config.seed),
    };
}

/// Optimizes a patch against a frozen detector.
///
/// `resume` continues from a saved state; `observer` sees every epoch record
/// with the state after that epoch (for logging and checkpointing).
pub fn train_patch<D: GridDetector + ?Sized>(
    dataset: &[Sample<f32>],
    detector: &D,
    config: &TrainConfig,
    colors: &PrintableColorSet,
    resume: Option<TrainerState>,
    observer: &mut dyn FnMut(&EpochRecord, &TrainerState),
) -> Result<TrainOutcome> {
    config.validate()?;
    let targets: Vec<&Sample<f32>> = dataset
        .iter()
        .filter(|s| s.annotations.iter().any(|a| is_target(a.class_id, config.target_class)))
        .collect();
    if targets.is_empty() {
        return Err(Error::NoTargets);
    }
    let fingerprint = detector.fingerprint();
    let mut state = match resume {
        Some(s) => s,
        None => initial_state(config)?,
    };
    if state.patch.height() != config.patch_size.0 || state.patch.width() != config.patch_size.1 {
        return Err(Error::Shape("resumed patch size differs from the configured size".into()));
    }
    let mut log = Vec::with_capacity(config.epochs.saturating_sub(state.epoch));
    let mut order: Vec<usize> = (0..targets.len()).collect();

    for epoch in state.epoch..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(config.seed, &[rng::TAG_SHUFFLE, epoch as u64]));
        let (mut obj_sum, mut nps_sum, mut tv_sum, mut sal_sum, mut steps) = (0.0, 0.0, 0.0, 0.0, 0usize);

        for batch in order.chunks(config.batch_size) {
            let mut grad = zero_grad(&state.patch);
            let scale = 1.0 / batch.len() as f32;
            let mut batch_obj = 0.0;
            for &i in batch {
                let mut r = rng::stream(config.seed, &[rng::TAG_TRANSFORM, epoch as u64, i as u64]);
                let (patched, traces) =
                    composite_sample(targets[i], &state.patch, &config.patch_config, config.target_class, || {
                        sample_transform(&mut r, &config.transform_ranges)
                    })?;
                let mut peak = 0.0;
                let (_, mut grad_image) = detector.input_gradient(&patched.image, &mut |out| {
                    let best = objectness_peak(out, config.objectness);
                    peak = best.value;
                    let mut g = OutputGrad::zeros_like(out);
                    match config.objectness {
                        ObjectnessMode::Raw => g.objectness[best.entry] = scale,
                        ObjectnessMode::TimesClass => {
                            let nc = out.num_classes;
                            g.objectness[best.entry] = scale * out.class_probs[best.entry * nc + best.class];
                            g.class_probs[best.entry * nc + best.class] = scale * out.objectness[best.entry];
                        }
                    }
                    g
                })?;
                batch_obj += peak;
                for trace in traces.iter().rev() {
                    trace.backward(&mut grad_image, &mut grad);
                }
            }
            let (nps, tv, sal) = regularizer_grad(&state.patch, &config.weights, colors, &mut grad);
            let obj = batch_obj / batch.len() as f64;
            let step = LossBreakdown::combine(obj, nps, tv, sal, &config.weights);
            if !step.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            obj_sum += batch_obj;
            nps_sum += nps;
            tv_sum += tv;
            sal_sum += sal;
            steps += 1;
            let adam = &mut state.adam;
            state.patch.update(|px| adam.update(px, &grad));
        }

        let l_obj = obj_sum / targets.len() as f64;
        let n = steps as f64;
        let br = LossBreakdown::combine(l_obj, nps_sum / n, tv_sum / n, sal_sum / n, &config.weights);
        let record = EpochRecord {
            epoch,
            l_obj: br.obj,
            l_nps: br.nps,
            l_tv: br.tv,
            l_sal: br.sal,
            total: br.total,
            lr: state.adam.lr,
        };
        state.adam.lr = state.plateau.observe(br.total, state.adam.lr);
        state.epoch = epoch + 1;
        stamp(&mut state.patch, config, state.epoch);
        if l_obj < state.best_obj {
            state.best_obj = l_obj;
            state.best_patch = state.patch.clone();
        }
        observer(&record, &state);
        log.push(record);
    }

    debug_assert_eq!(fingerprint, detector.fingerprint());
    let mut patch = state.patch;
    if log.is_empty() {
        stamp(&mut patch, config, state.epoch);
    }
    Ok(TrainOutcome { patch, best_patch: state.best_patch, log, detector_fingerprint: fingerprint })
}
