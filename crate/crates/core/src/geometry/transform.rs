use rand::Rng;

use crate::error::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Closed `[min, max]` ranges for the jitter dimensions. The angle is always
/// drawn uniformly from `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TransformRanges {
    pub scale: (f64, f64),
    /// Range of the per-pixel noise half-width; each patch pixel then gets
    /// uniform noise in `[-amplitude, amplitude]`.
    pub noise: (f64, f64),
    pub contrast: (f64, f64),
    pub brightness: (f64, f64),
}

impl Default for TransformRanges {
    fn default() -> Self {
        Self { scale: (0.9, 1.1), noise: (0.0, 0.1), contrast: (0.8, 1.2), brightness: (-0.1, 0.1) }
    }
}

impl TransformRanges {
    /// Only rotation varies.
    pub const fn identity() -> Self {
        Self { scale: (1.0, 1.0), noise: (0.0, 0.0), contrast: (1.0, 1.0), brightness: (0.0, 0.0) }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("scale", self.scale),
            ("noise", self.noise),
            ("contrast", self.contrast),
            ("brightness", self.brightness),
        ] {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidRange { name, min: lo, max: hi });
            }
        }
        if self.scale.0 <= 0.0 {
            return Err(Error::InvalidConfig("scale jitter must be positive".into()));
        }
        if self.noise.0 < 0.0 {
            return Err(Error::InvalidConfig("noise amplitude must be non-negative".into()));
        }
        Ok(())
    }
}

/// One draw of the physical-variation model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TransformSample {
    /// Degrees in `[0, 360)`, clockwise on screen.
    pub angle: f64,
    pub scale_jitter: f64,
    pub noise_amplitude: f64,
    pub contrast: f64,
    pub brightness: f64,
    /// Seeds the per-pixel noise field used at composite time.
    pub noise_seed: u64,
}

impl TransformSample {
    pub const fn identity() -> Self {
        Self { angle: 0.0, scale_jitter: 1.0, noise_amplitude: 0.0, contrast: 1.0, brightness: 0.0, noise_seed: 0 }
    }

    pub fn with_angle(angle: f64) -> Self {
        Self { angle, ..Self::identity() }
    }
}

#[inline]
fn lerp((lo, hi): (f64, f64), u: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        lo + (hi - lo) * u
    }
}

/// Draws an independent transform; the angle is uniform on `[0, 360)` and
/// every other field is uniform over its configured range.
pub fn sample_transform<R: Rng + ?Sized>(rng: &mut R, ranges: &TransformRanges) -> Result<TransformSample> {
    ranges.validate()?;
    let angle = 360.0 * rng.gen::<f64>();
    Ok(TransformSample {
        angle,
        scale_jitter: lerp(ranges.scale, rng.gen()),
        noise_amplitude: lerp(ranges.noise, rng.gen()),
        contrast: lerp(ranges.contrast, rng.gen()),
        brightness: lerp(ranges.brightness, rng.gen()),
        noise_seed: rng.gen(),
    })
}
