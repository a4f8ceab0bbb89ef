//! Differentiable patch compositing.
//!
//! The patch is first jittered in its own frame (`contrast * p + brightness +
//! noise`, clamped to `[0, 1]`), then inverse-mapped: every image pixel whose
//! center falls inside the rotated, scaled placement rectangle takes the
//! bilinear sample of the jittered patch at the corresponding location. The
//! sample is a convex combination of four patch values, so the output stays in
//! `[0, 1]` and is linear in the patch wherever the jitter clamp is inactive.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Patch, Placement, TransformSample};
use crate::image::{Image, Scalar};

#[derive(Debug, Clone, Copy)]
struct Tap {
    pixel: u32,
    idx: [u32; 4],
    w: [f64; 4],
}

/// Record of one composite, sufficient to push image gradients back onto
/// patch pixels.
#[derive(Debug, Clone)]
pub struct CompositeTrace {
    taps: Vec<Tap>,
    image_width: usize,
    image_plane: usize,
    patch_plane: usize,
    contrast: f64,
    active: Vec<bool>,
    outside: bool,
}

impl CompositeTrace {
    /// The placement did not overlap the image at all; nothing was written.
    pub fn is_outside(&self) -> bool {
        self.outside
    }

    /// Number of image pixels overwritten by the patch.
    pub fn footprint_len(&self) -> usize {
        self.taps.len()
    }

    /// Overwritten pixels as `(x, y)`.
    pub fn footprint(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.taps.iter().map(move |t| (t.pixel as usize % self.image_width, t.pixel as usize / self.image_width))
    }

    /// Accumulates `d loss / d patch` into `grad_patch` given `d loss / d
    /// output` in `grad_image`. The footprint entries of `grad_image` are then
    /// zeroed: the composite overwrote those pixels, so earlier composites in
    /// a chain receive no gradient through them. Call traces in reverse
    /// order of application.
    pub fn backward<T: Scalar>(&self, grad_image: &mut Image<T>, grad_patch: &mut [f64]) {
        assert_eq!(grad_patch.len(), 3 * self.patch_plane, "patch gradient length");
        let g = grad_image.data_mut();
        for tap in &self.taps {
            for c in 0..3 {
                let slot = &mut g[c * self.image_plane + tap.pixel as usize];
                let go = slot.to_f64();
                *slot = T::default();
                if go == 0.0 {
                    continue;
                }
                for (&i, &w) in tap.idx.iter().zip(&tap.w) {
                    let k = c * self.patch_plane + i as usize;
                    if self.active[k] {
                        grad_patch[k] += w * go * self.contrast;
                    }
                }
            }
        }
    }
}

/// Composites `patch` onto a copy of `image`; see [`composite_patch_in_place`].
pub fn composite_patch<T: Scalar>(
    image: &Image<T>,
    patch: &Patch,
    placement: &Placement,
    transform: &TransformSample,
) -> (Image<T>, CompositeTrace) {
    let mut out = image.clone();
    let trace = composite_patch_in_place(&mut out, patch, placement, transform);
    (out, trace)
}

/// Warps the jittered patch into `placement` rotated by `transform.angle`
/// about the placement center and scaled by `transform.scale_jitter`.
/// Pixels outside the rotated footprint are untouched; the footprint is
/// clipped to the image.
pub fn composite_patch_in_place<T: Scalar>(
    image: &mut Image<T>,
    patch: &Patch,
    placement: &Placement,
    transform: &TransformSample,
) -> CompositeTrace {
    let ph = patch.height();
    let pw = patch.width();
    let patch_plane = ph * pw;
    let mut trace = CompositeTrace {
        taps: Vec::new(),
        image_width: image.width(),
        image_plane: image.plane_len(),
        patch_plane,
        contrast: transform.contrast,
        active: Vec::new(),
        outside: false,
    };

    let fw = placement.width * transform.scale_jitter;
    let fh = placement.height * transform.scale_jitter;
    let radius = 0.5 * libm::sqrt(fw * fw + fh * fh);
    let x_lo = libm::floor(placement.cx - radius - 1.0).max(0.0);
    let y_lo = libm::floor(placement.cy - radius - 1.0).max(0.0);
    let x_hi = libm::ceil(placement.cx + radius + 1.0).min(image.width() as f64);
    let y_hi = libm::ceil(placement.cy + radius + 1.0).min(image.height() as f64);
    if !(fw > 0.0 && fh > 0.0) || x_lo >= x_hi || y_lo >= y_hi {
        trace.outside = true;
        return trace;
    }

    // Jitter in the patch frame.
    let mut jittered = Vec::with_capacity(3 * patch_plane);
    trace.active.reserve(3 * patch_plane);
    let mut noise_rng = (transform.noise_amplitude > 0.0).then(|| ChaCha8Rng::seed_from_u64(transform.noise_seed));
    for &p in patch.pixels() {
        let noise = match noise_rng.as_mut() {
            Some(r) => transform.noise_amplitude * (2.0 * r.gen::<f64>() - 1.0),
            None => 0.0,
        };
        let v = transform.contrast * p + transform.brightness + noise;
        trace.active.push((0.0..=1.0).contains(&v));
        jittered.push(v.clamp(0.0, 1.0));
    }

    let theta = transform.angle.to_radians();
    let (sin, cos) = (libm::sin(theta), libm::cos(theta));
    let (half_w, half_h) = (0.5 * fw, 0.5 * fh);
    let width = image.width();
    let plane = image.plane_len();
    let data = image.data_mut();

    for y in y_lo as usize..y_hi as usize {
        let dy = y as f64 + 0.5 - placement.cy;
        for x in x_lo as usize..x_hi as usize {
            let dx = x as f64 + 0.5 - placement.cx;
            let u = cos * dx + sin * dy;
            let v = -sin * dx + cos * dy;
            if u < -half_w || u >= half_w || v < -half_h || v >= half_h {
                continue;
            }
            let pu = ((u / fw + 0.5) * pw as f64 - 0.5).clamp(0.0, (pw - 1) as f64);
            let pv = ((v / fh + 0.5) * ph as f64 - 0.5).clamp(0.0, (ph - 1) as f64);
            let c0 = pu as usize;
            let r0 = pv as usize;
            let c1 = (c0 + 1).min(pw - 1);
            let r1 = (r0 + 1).min(ph - 1);
            let ax = pu - c0 as f64;
            let ay = pv - r0 as f64;
            let tap = Tap {
                pixel: (y * width + x) as u32,
                idx: [(r0 * pw + c0) as u32, (r0 * pw + c1) as u32, (r1 * pw + c0) as u32, (r1 * pw + c1) as u32],
                w: [(1.0 - ax) * (1.0 - ay), ax * (1.0 - ay), (1.0 - ax) * ay, ax * ay],
            };
            for c in 0..3 {
                let base = c * patch_plane;
                let mut acc = 0.0;
                for (&i, &w) in tap.idx.iter().zip(&tap.w) {
                    acc += w * jittered[base + i as usize];
                }
                data[c * plane + tap.pixel as usize] = T::from_f64(acc.clamp(0.0, 1.0));
            }
            trace.taps.push(tap);
        }
    }
    trace
}
