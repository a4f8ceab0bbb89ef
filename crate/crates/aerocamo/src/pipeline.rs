//! Pipeline stages with their on-disk artifacts. The CLI and the acceptance
//! suite both drive these.

use std::collections::BTreeSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use aerocamo_core::detector::{train_toy_detector, DetectorTrainConfig, DetectorTrainReport, GridDetector};
use aerocamo_core::eval::{derive_ground_truth, evaluate_condition, Condition, EvalConfig};
use aerocamo_core::ingest::{split_by_source, tile_images, Provenance, SourceImage, TileSpec};
use aerocamo_core::trainer::{self, TrainerState, TransformPolicy};
use aerocamo_core::{
    Annotation, EvalReport, Patch, PatchConfig, PrintableColorSet, Sample, ToyDetector, ToyDetectorConfig,
    TrainConfig, TrainOutcome,
};
use serde::Serialize;

use crate::config::{IngestConfig, SynthSection};
use crate::error::{self, AppError, Result};
use crate::manifest::{Dataset, DatasetManifest, ManifestEntry, Split};
use crate::{annotations, imageio, patchio, weights};

/// Scene indices of the test split start here so the two splits never share
/// a scene.
pub const TEST_INDEX_OFFSET: u64 = 1 << 32;

/// Generates a synthetic dataset with `manifest.json` and PNG images under `out`.
pub fn synth_data(section: &SynthSection, seed: u64, out: &Path) -> Result<DatasetManifest> {
    let cfg = &section.scene;
    let mut manifest = DatasetManifest::new(cfg.image_size, vec!["plane".into()]);
    for (split, start, count) in
        [(Split::Train, 0, section.train_count), (Split::Test, TEST_INDEX_OFFSET, section.test_count)]
    {
        for i in 0..count as u64 {
            let s = aerocamo_core::synth::generate_scene(cfg, seed, start + i);
            let rel = format!("images/{}/{}.png", split.as_str(), s.id);
            imageio::write_rgb(&out.join(&rel), &s.image)?;
            let size = cfg.image_size;
            manifest.entries.push(ManifestEntry {
                image: rel,
                split,
                annotations: s.annotations,
                provenance: Provenance { source: s.id, x: 0, y: 0, width: size, height: size, padded: false },
            });
        }
    }
    manifest.save(&out.join("manifest.json"))?;
    Ok(manifest)
}

/// Tiles every `*.png` in `images` (annotations from the same-stem file in
/// `labels`), keeps tiles holding the target class and splits by source.
pub fn ingest(images: &Path, labels: &Path, cfg: &IngestConfig, seed: u64, out: &Path) -> Result<DatasetManifest> {
    let mut sources: Vec<PathBuf> = std::fs::read_dir(images)
        .map_err(|e| AppError::io(images, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    sources.sort();
    if !labels.is_dir() {
        return Err(AppError::MissingInput(labels.to_path_buf()));
    }

    // Read every label file first so class ids do not depend on tiling order.
    let mut labelled = Vec::with_capacity(sources.len());
    let mut names = BTreeSet::new();
    for src in &sources {
        let stem = src.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let label = labels.join(format!("{stem}.{}", cfg.format.extension()));
        let boxes = annotations::load_annotations(&label, cfg.format)?;
        names.extend(boxes.iter().map(|b| b.class.clone()).filter(|c| *c != cfg.target_class));
        labelled.push((src, stem, boxes));
    }
    let classes: Vec<String> = std::iter::once(cfg.target_class.clone()).chain(names).collect();
    let class_id = |name: &str| classes.iter().position(|c| c == name).expect("class registered") as u32;

    let spec = TileSpec { tile_size: cfg.tile_size, overlap: cfg.overlap, min_visible: cfg.min_visible, target_class: Some(0) };
    let mut entries = Vec::new();
    for (src, stem, boxes) in labelled {
        let source = SourceImage {
            id: stem.clone(),
            image: imageio::read_rgb8(src)?,
            annotations: boxes.iter().map(|b| Annotation::new(class_id(&b.class), b.bbox)).collect(),
        };
        for tile in tile_images(std::slice::from_ref(&source), &spec)? {
            let p = &tile.provenance;
            let rel = format!("tiles/{stem}_x{}_y{}.png", p.x, p.y);
            imageio::write_rgb8(&out.join(&rel), &tile.image)?;
            entries.push(ManifestEntry { image: rel, split: Split::Train, annotations: tile.annotations, provenance: tile.provenance });
        }
    }
    let (train, test) = split_by_source(&entries, |e| e.provenance.source.as_str(), cfg.test_fraction, seed)?;
    let mut manifest = DatasetManifest::new(cfg.tile_size, classes);
    manifest.entries = train.into_iter().chain(test.into_iter().map(|e| ManifestEntry { split: Split::Test, ..e })).collect();
    manifest.save(&out.join("manifest.json"))?;
    Ok(manifest)
}

#[derive(Debug, Clone, Serialize)]
pub struct DetectorSummary {
    pub heldout_ap: Option<f64>,
    pub min_ap: f64,
    pub converged: bool,
    pub fingerprint: String,
    pub param_count: usize,
}

/// Trains the toy detector on the train split (held-out AP from the test
/// split) and writes `detector.bin`, `detector_log.jsonl` and
/// `detector_summary.json`.
pub fn train_detector(
    dataset: &Dataset,
    model: &ToyDetectorConfig,
    cfg: &DetectorTrainConfig,
    out: &Path,
) -> Result<DetectorTrainReport> {
    let size = Some((model.input_size, model.input_size));
    let train = dataset.samples(Split::Train, model.num_classes, size)?;
    let test = dataset.samples(Split::Test, model.num_classes, size)?;
    let heldout = (!test.is_empty()).then_some(test.as_slice());
    let report = train_toy_detector(&train, heldout, model.clone(), cfg, &mut |_| {})?;
    let mut log = String::new();
    for rec in &report.log {
        log.push_str(&serde_json::to_string(rec).expect("epoch record serializes"));
        log.push('\n');
    }
    error::write(&out.join("detector_log.jsonl"), log)?;
    weights::save_detector(&out.join("detector.bin"), &report.detector)?;
    let summary = DetectorSummary {
        heldout_ap: report.heldout_ap,
        min_ap: cfg.min_ap,
        converged: report.converged,
        fingerprint: format!("{:016x}", report.detector.fingerprint()),
        param_count: report.detector.params().len(),
    };
    error::write_json(&out.join("detector_summary.json"), &summary)?;
    Ok(report)
}

/// Deterministic identifier of a resolved configuration text.
pub fn config_id(text: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("cfg-{h:016x}")
}

fn tag(patch: &mut Patch, run_id: &str) {
    patch.meta.run_id = Some(run_id.to_string());
}

/// Optimizes a patch, writing `log.jsonl` (one record per epoch),
/// checkpoints under `checkpoints/` (patch PNG plus the resumable
/// `state.json`), `best.png` and `patch.png`. A diverged run keeps its last
/// checkpoint on disk.
#[allow(clippy::too_many_arguments)]
pub fn train_patch<D: GridDetector + ?Sized>(
    samples: &[Sample<f32>],
    detector: &D,
    cfg: &TrainConfig,
    colors: &PrintableColorSet,
    run_id: &str,
    out: &Path,
    resume: Option<TrainerState>,
) -> Result<TrainOutcome> {
    let log_path = out.join("log.jsonl");
    let ckpt_dir = out.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir).map_err(|e| AppError::Io { path: ckpt_dir.clone(), source: e })?;
    let mut log = std::fs::File::create(&log_path).map_err(|e| AppError::Io { path: log_path.clone(), source: e })?;
    let mut failure: Option<AppError> = None;
    let every = cfg.checkpoint_every;
    let epochs = cfg.epochs;
    let mut observer = |rec: &trainer::EpochRecord, state: &TrainerState| {
        if failure.is_some() {
            return;
        }
        let mut step = || -> Result<()> {
            let line = serde_json::to_string(rec).expect("epoch record serializes");
            writeln!(log, "{line}").map_err(|e| AppError::Io { path: log_path.clone(), source: e })?;
            if (every > 0 && state.epoch % every == 0) || state.epoch == epochs {
                let mut p = state.patch.clone();
                tag(&mut p, run_id);
                patchio::save_patch(&ckpt_dir.join(format!("epoch-{:04}.png", state.epoch)), &p)?;
                error::write_json(&ckpt_dir.join("state.json"), state)?;
            }
            Ok(())
        };
        if let Err(e) = step() {
            failure = Some(e);
        }
    };
    let mut outcome = trainer::train_patch(samples, detector, cfg, colors, resume, &mut observer)?;
    if let Some(e) = failure {
        return Err(e);
    }
    tag(&mut outcome.patch, run_id);
    tag(&mut outcome.best_patch, run_id);
    patchio::save_patch(&out.join("patch.png"), &outcome.patch)?;
    patchio::save_patch(&out.join("best.png"), &outcome.best_patch)?;
    Ok(outcome)
}

pub fn load_state(path: &Path) -> Result<TrainerState> {
    error::read_json(path)
}

/// One evaluation condition: which patch (none for CLEAN) in which geometry.
#[derive(Debug, Clone)]
pub struct ConditionSpec<'a> {
    pub condition: Condition,
    pub patch: Option<&'a Patch>,
    pub patch_config: PatchConfig,
}

/// Derives ground truth from clean detections once and scores every
/// requested condition against it.
pub fn evaluate<D: GridDetector + ?Sized>(
    detector: &D,
    samples: &[Sample<f32>],
    conditions: &[ConditionSpec<'_>],
    cfg: &EvalConfig,
) -> Result<Vec<EvalReport>> {
    let gt = derive_ground_truth(detector, samples, cfg.gt_confidence, cfg.nms_iou)?;
    conditions
        .iter()
        .map(|c| Ok(evaluate_condition(detector, samples, &gt, c.condition, c.patch, &c.patch_config, cfg)?))
        .collect()
}

/// Composites `patch` onto every annotated object of one split and writes
/// the images plus a manifest with the untouched annotations.
pub fn apply(
    dataset: &Dataset,
    split: Split,
    patch: &Patch,
    patch_config: &PatchConfig,
    policy: &TransformPolicy,
    seed: u64,
    out: &Path,
) -> Result<DatasetManifest> {
    let n = dataset.manifest.classes.len().max(1);
    let samples = dataset.samples(split, n, None)?;
    let patched = trainer::apply_patch_to_dataset(&samples, patch, patch_config, policy, seed)?;
    let mut manifest = DatasetManifest::new(dataset.manifest.tile_size, dataset.manifest.classes.clone());
    for (entry, s) in dataset.manifest.split(split).zip(&patched) {
        let rel = format!("patched/{}", Path::new(&entry.image).file_name().and_then(|f| f.to_str()).unwrap_or("image.png"));
        imageio::write_rgb(&out.join(&rel), &s.image)?;
        manifest.entries.push(ManifestEntry { image: rel, ..entry.clone() });
    }
    manifest.save(&out.join("manifest.json"))?;
    Ok(manifest)
}

/// Loads a detector and the split it is evaluated or attacked on, resized to
/// the detector's input.
pub fn load_detector_and_split(weights_path: &Path, manifest: &Path, split: Split) -> Result<(ToyDetector, Vec<Sample<f32>>)> {
    let det = weights::load_detector(weights_path)?;
    let dataset = Dataset::open(manifest)?;
    let (w, h) = det.input_size();
    let samples = dataset.samples(split, det.num_classes(), Some((w, h)))?;
    Ok((det, samples))
}
