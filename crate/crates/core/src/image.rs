//! Planar RGB images.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::Annotation;

/// Pixel sample type. Values are intensities in `[0, 1]`.
pub trait Scalar: Copy + Default + PartialEq + PartialOrd + core::fmt::Debug + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

/// Three-channel image stored channel-major (`data[c * h * w + y * w + x]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Image<T = f32> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Image<T> {
    pub const CHANNELS: usize = 3;

    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![T::default(); 3 * width * height] }
    }

    pub fn from_planar(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != 3 * width * height {
            return Err(Error::Shape(alloc::format!(
                "expected {} samples for {}x{} RGB, got {}",
                3 * width * height,
                width,
                height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(3 * width * height);
        for c in 0..3 {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, x, y));
                }
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> T {
        self.data[c * self.plane_len() + y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, x: usize, y: usize, v: T) {
        let i = c * self.plane_len() + y * self.width + x;
        self.data[i] = v;
    }

    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    /// Copies the `width x height` window at `(x0, y0)`; samples outside the
    /// source are filled with `T::default()`.
    pub fn crop_padded(&self, x0: usize, y0: usize, width: usize, height: usize) -> Self {
        let mut out = Self::new(width, height);
        let copy_w = self.width.saturating_sub(x0).min(width);
        let copy_h = self.height.saturating_sub(y0).min(height);
        for c in 0..3 {
            for y in 0..copy_h {
                let src = c * self.plane_len() + (y0 + y) * self.width + x0;
                let dst = c * width * height + y * width;
                out.data[dst..dst + copy_w].copy_from_slice(&self.data[src..src + copy_w]);
            }
        }
        out
    }
}

impl<T: Scalar> Image<T> {
    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        Self::from_fn(width, height, |c, _, _| T::from_f64(rgb[c]))
    }

    pub fn convert<U: Scalar>(&self) -> Image<U> {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            let f = v.to_f64();
            if !(0.0..=1.0).contains(&f) {
                *v = T::from_f64(f.clamp(0.0, 1.0));
            }
        }
    }

    pub fn in_unit_range(&self) -> bool {
        self.data.iter().all(|v| (0.0..=1.0).contains(&v.to_f64()))
    }

    /// Bilinear resize using pixel-center alignment.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Self {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        Self::from_fn(width, height, |c, x, y| {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let x0 = fx as usize;
            let y0 = fy as usize;
            let x1 = (x0 + 1).min(self.width - 1);
            let y1 = (y0 + 1).min(self.height - 1);
            let ax = fx - x0 as f64;
            let ay = fy - y0 as f64;
            let v = (1.0 - ay) * ((1.0 - ax) * self.get(c, x0, y0).to_f64() + ax * self.get(c, x1, y0).to_f64())
                + ay * ((1.0 - ax) * self.get(c, x0, y1).to_f64() + ax * self.get(c, x1, y1).to_f64());
            T::from_f64(v)
        })
    }
}

/// An image together with its object annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T = f32> {
    pub id: String,
    pub image: Image<T>,
    pub annotations: Vec<Annotation>,
}

impl<T: Scalar> Sample<T> {
    /// Resizes the image to `(width, height)` and rescales the annotations.
    /// Returns the sample and the `(sx, sy)` factors applied to coordinates.
    pub fn resized(&self, width: usize, height: usize) -> (Self, (f64, f64)) {
        let sx = width as f64 / self.image.width() as f64;
        let sy = height as f64 / self.image.height() as f64;
        let annotations = self
            .annotations
            .iter()
            .map(|a| Annotation { class_id: a.class_id, bbox: a.bbox.scaled(sx, sy) })
            .collect();
        (
            Self { id: self.id.clone(), image: self.image.resize_bilinear(width, height), annotations },
            (sx, sy),
        )
    }
}
