//! Patches on disk: an 8-bit RGB PNG plus a JSON sidecar with the metadata.

use std::path::{Path, PathBuf};

use aerocamo_core::{Image, Patch, PatchMeta};
use serde::{Deserialize, Serialize};

use crate::error::{self, AppError, Result};
use crate::imageio;

pub const PATCH_FORMAT: &str = "aerocamo-patch";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchSidecar {
    pub format: String,
    pub version: u32,
    pub height: usize,
    pub width: usize,
    pub meta: PatchMeta,
}

/// `patch.png` -> `patch.json`.
pub fn sidecar_path(png: &Path) -> PathBuf {
    png.with_extension("json")
}

pub fn save_patch(path: &Path, patch: &Patch) -> Result<()> {
    let img = Image::from_fn(patch.width(), patch.height(), |c, x, y| imageio::quantize(patch.get(c, y, x)));
    imageio::write_rgb8(path, &img)?;
    let side = PatchSidecar {
        format: PATCH_FORMAT.into(),
        version: 1,
        height: patch.height(),
        width: patch.width(),
        meta: patch.meta.clone(),
    };
    error::write_json(&sidecar_path(path), &side)
}

/// Loads a patch PNG. Metadata comes from the sidecar when one exists.
pub fn load_patch(path: &Path) -> Result<Patch> {
    let img = imageio::read_rgb8(path)?;
    let (h, w) = (img.height(), img.width());
    let pixels = img.data().iter().map(|&v| v as f64 / 255.0).collect();
    let mut patch = Patch::from_pixels(h, w, pixels).map_err(|e| AppError::format(path, e))?;
    let side_path = sidecar_path(path);
    if side_path.exists() {
        let side: PatchSidecar = error::read_json(&side_path)?;
        if side.format != PATCH_FORMAT || (side.height, side.width) != (h, w) {
            return Err(AppError::format(&side_path, "sidecar does not describe this patch image"));
        }
        patch.meta = side.meta;
    }
    Ok(patch)
}
