//! Dataset manifests: a JSON document listing PNG images (paths relative to
//! the manifest), their annotations, split and source provenance.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use aerocamo_core::ingest::Provenance;
use aerocamo_core::{Annotation, Sample};
use serde::{Deserialize, Serialize};

use crate::error::{self, AppError, Result};
use crate::imageio;

pub const MANIFEST_FORMAT: &str = "aerocamo-manifest";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// PNG path relative to the manifest's directory.
    pub image: String,
    pub split: Split,
    pub annotations: Vec<Annotation>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub tile_size: usize,
    /// Class names indexed by `class_id`; the target class is id 0.
    pub classes: Vec<String>,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn new(tile_size: usize, classes: Vec<String>) -> Self {
        Self { format: MANIFEST_FORMAT.into(), version: 1, tile_size, classes, entries: Vec::new() }
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Sources that contribute entries to both splits (empty for a valid
    /// manifest).
    pub fn leaked_sources(&self) -> BTreeSet<&str> {
        let train: BTreeSet<&str> = self.split(Split::Train).map(|e| e.provenance.source.as_str()).collect();
        self.split(Split::Test).map(|e| e.provenance.source.as_str()).filter(|s| train.contains(s)).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        error::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = error::read_json(path)?;
        if m.format != MANIFEST_FORMAT {
            return Err(AppError::format(path, format!("expected format {MANIFEST_FORMAT}, found {}", m.format)));
        }
        Ok(m)
    }
}

/// A manifest together with the directory its image paths are relative to.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub root: PathBuf,
}

impl Dataset {
    pub fn open(manifest_path: &Path) -> Result<Self> {
        let manifest = DatasetManifest::load(manifest_path)?;
        let root = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { manifest, root })
    }

    /// Loads one split. Only annotations with `class_id < num_classes` are
    /// kept; images whose size differs from `input` are resized and their
    /// boxes scaled to match.
    pub fn samples(&self, split: Split, num_classes: usize, input: Option<(usize, usize)>) -> Result<Vec<Sample<f32>>> {
        self.manifest
            .split(split)
            .map(|e| {
                let path = self.root.join(&e.image);
                let image = imageio::read_rgb(&path)?;
                let annotations = e.annotations.iter().copied().filter(|a| (a.class_id as usize) < num_classes).collect();
                let sample = Sample { id: e.image.clone(), image, annotations };
                Ok(match input {
                    Some((w, h)) if (sample.image.width(), sample.image.height()) != (w, h) => sample.resized(w, h).0,
                    _ => sample,
                })
            })
            .collect()
    }
}
