//! Patches, where they go on an object, and how they are warped into a scene.

mod composite;
mod placement;
mod transform;

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

pub use composite::{composite_patch, composite_patch_in_place, CompositeTrace};
pub use placement::patch_placements;
pub use transform::{sample_transform, TransformRanges, TransformSample};

use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Axis-aligned box in pixel coordinates, center form.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { cx: 0.5 * (x0 + x1), cy: 0.5 * (y0 + y1), w: x1 - x0, h: y1 - y0 }
    }

    #[inline]
    pub fn x0(&self) -> f64 {
        self.cx - 0.5 * self.w
    }
    #[inline]
    pub fn y0(&self) -> f64 {
        self.cy - 0.5 * self.h
    }
    #[inline]
    pub fn x1(&self) -> f64 {
        self.cx + 0.5 * self.w
    }
    #[inline]
    pub fn y1(&self) -> f64 {
        self.cy + 0.5 * self.h
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    /// Intersection with another box, `None` when the overlap is empty.
    pub fn intersect(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x0().max(other.x0());
        let y0 = self.y0().max(other.y0());
        let x1 = self.x1().min(other.x1());
        let y1 = self.y1().min(other.y1());
        (x1 > x0 && y1 > y0).then(|| BBox::from_corners(x0, y0, x1, y1))
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersect(other).map_or(0.0, |b| b.area());
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> BBox {
        BBox { cx: self.cx + dx, cy: self.cy + dy, ..*self }
    }

    pub fn scaled(&self, sx: f64, sy: f64) -> BBox {
        BBox { cx: self.cx * sx, cy: self.cy * sy, w: self.w * sx, h: self.h * sy }
    }

    pub fn is_valid(&self) -> bool {
        self.w > 0.0 && self.h > 0.0 && self.cx.is_finite() && self.cy.is_finite()
    }

    /// True if the box overlaps the `[0, width] x [0, height]` frame.
    pub fn intersects_frame(&self, width: f64, height: f64) -> bool {
        self.intersect(&BBox::from_corners(0.0, 0.0, width, height)).is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Annotation {
    pub class_id: u32,
    pub bbox: BBox,
}

impl Annotation {
    pub const fn new(class_id: u32, bbox: BBox) -> Self {
        Self { class_id, bbox }
    }
}

/// Where the patch sits relative to the annotated box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PlacementMode {
    OnTopCenter,
    SideOffset,
    TwoOnTop,
}

/// Patch size relative to the target box plus placement rule.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PatchConfig {
    pub rel_width: f64,
    pub rel_height: f64,
    pub placement: PlacementMode,
    /// Extra horizontal gap for [`PlacementMode::SideOffset`], as a fraction
    /// of the box width.
    #[cfg_attr(feature = "serde", serde(default = "default_side_gap"))]
    pub side_gap: f64,
}

pub const DEFAULT_SIDE_GAP: f64 = 0.05;

#[cfg(feature = "serde")]
fn default_side_gap() -> f64 {
    DEFAULT_SIDE_GAP
}

impl PatchConfig {
    pub fn new(rel_width: f64, rel_height: f64, placement: PlacementMode) -> Result<Self> {
        let cfg = Self { rel_width, rel_height, placement, side_gap: DEFAULT_SIDE_GAP };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 0.2 x 0.2, on top.
    pub const fn large() -> Self {
        Self { rel_width: 0.2, rel_height: 0.2, placement: PlacementMode::OnTopCenter, side_gap: DEFAULT_SIDE_GAP }
    }

    /// 0.1 x 0.1, on top. Also the geometry of the less-colorful run.
    pub const fn small() -> Self {
        Self { rel_width: 0.1, rel_height: 0.1, placement: PlacementMode::OnTopCenter, side_gap: DEFAULT_SIDE_GAP }
    }

    /// 0.2 x 0.2, next to the object.
    pub const fn large_side() -> Self {
        Self { rel_width: 0.2, rel_height: 0.2, placement: PlacementMode::SideOffset, side_gap: DEFAULT_SIDE_GAP }
    }

    /// Two 0.075 x 0.075 patches on top.
    pub const fn two_small() -> Self {
        Self { rel_width: 0.075, rel_height: 0.075, placement: PlacementMode::TwoOnTop, side_gap: DEFAULT_SIDE_GAP }
    }

    /// Named presets: `large`, `small`, `large-side`, `small-less-colorful`, `two-small`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "large" => Some(Self::large()),
            "small" | "small-less-colorful" => Some(Self::small()),
            "large-side" => Some(Self::large_side()),
            "two-small" => Some(Self::two_small()),
            _ => None,
        }
    }

    pub fn count(&self) -> usize {
        match self.placement {
            PlacementMode::TwoOnTop => 2,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.rel_width) || !unit(self.rel_height) {
            return Err(Error::InvalidConfig(alloc::format!(
                "relative patch size must lie in (0, 1], got {} x {}",
                self.rel_width,
                self.rel_height
            )));
        }
        if !(self.side_gap >= 0.0) {
            return Err(Error::InvalidConfig(alloc::format!("side_gap must be >= 0, got {}", self.side_gap)));
        }
        Ok(())
    }

    /// Short identifier such as `on-top-0.1x0.1`.
    pub fn label(&self) -> String {
        let mode = match self.placement {
            PlacementMode::OnTopCenter => "on-top",
            PlacementMode::SideOffset => "side",
            PlacementMode::TwoOnTop => "two-on-top",
        };
        alloc::format!("{}-{}x{}", mode, self.rel_width, self.rel_height)
    }
}

/// Rectangle a patch is warped into, before transform jitter.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Placement {
    pub cx: f64,
    pub cy: f64,
    pub width: f64,
    pub height: f64,
}

impl Placement {
    pub const fn new(cx: f64, cy: f64, width: f64, height: f64) -> Self {
        Self { cx, cy, width, height }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PatchMeta {
    pub id: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub config: Option<PatchConfig>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub weights: Option<LossWeights>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub run_id: Option<String>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub epoch: Option<usize>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub seed: Option<u64>,
}

/// Learnable RGB pattern with values in `[0, 1]`, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "PatchRepr", into = "PatchRepr"))]
pub struct Patch {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
    pub meta: PatchMeta,
}

#[cfg(feature = "serde")]
#[derive(Serialize, Deserialize)]
struct PatchRepr {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
    meta: PatchMeta,
}

#[cfg(feature = "serde")]
impl TryFrom<PatchRepr> for Patch {
    type Error = Error;

    fn try_from(r: PatchRepr) -> Result<Self> {
        let mut p = Patch::from_pixels(r.height, r.width, r.pixels)?;
        p.meta = r.meta;
        Ok(p)
    }
}

#[cfg(feature = "serde")]
impl From<Patch> for PatchRepr {
    fn from(p: Patch) -> Self {
        PatchRepr { height: p.height, width: p.width, pixels: p.pixels, meta: p.meta }
    }
}

impl Patch {
    pub fn from_pixels(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::PatchTooSmall { height, width });
        }
        if pixels.len() != 3 * height * width {
            return Err(Error::Shape(alloc::format!(
                "patch {}x{} needs {} values, got {}",
                height,
                width,
                3 * height * width,
                pixels.len()
            )));
        }
        if pixels.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig("patch pixels must lie in [0, 1]".into()));
        }
        Ok(Self { height, width, pixels, meta: PatchMeta::default() })
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Result<Self> {
        let n = height * width;
        let mut px = Vec::with_capacity(3 * n);
        for c in rgb {
            px.extend(core::iter::repeat(c.clamp(0.0, 1.0)).take(n));
        }
        Self::from_pixels(height, width, px)
    }

    /// I.i.d. uniform `[0, 1)` pixels from the given generator.
    pub fn uniform<R: Rng + ?Sized>(height: usize, width: usize, rng: &mut R) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::PatchTooSmall { height, width });
        }
        let pixels = (0..3 * height * width).map(|_| rng.gen::<f64>()).collect();
        Self::from_pixels(height, width, pixels)
    }

    /// Uniform random initialization keyed by `seed`.
    pub fn random(height: usize, width: usize, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, &[rng::TAG_PATCH_INIT]);
        Self::uniform(height, width, &mut rng)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }
    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }
    #[inline]
    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.pixels.len()
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    #[inline]
    pub fn index(&self, c: usize, row: usize, col: usize) -> usize {
        c * self.height * self.width + row * self.width + col
    }

    #[inline]
    pub fn get(&self, c: usize, row: usize, col: usize) -> f64 {
        self.pixels[self.index(c, row, col)]
    }

    /// Applies `f` to the raw pixel buffer, then clamps back into `[0, 1]`.
    pub fn update(&mut self, f: impl FnOnce(&mut [f64])) {
        f(&mut self.pixels);
        self.clamp();
    }

    pub fn clamp(&mut self) {
        for v in &mut self.pixels {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
    }

    /// Pixel `(r, g, b)` at spatial index `k = row * width + col`.
    #[inline]
    pub fn rgb(&self, k: usize) -> [f64; 3] {
        let n = self.height * self.width;
        [self.pixels[k], self.pixels[n + k], self.pixels[2 * n + k]]
    }
}
