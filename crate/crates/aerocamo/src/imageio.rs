//! PNG reading and writing for planar images.

use std::path::Path;

use aerocamo_core::{Image, Scalar};

use crate::error::{self, AppError, Result};

/// Reads any PNG as 8-bit RGB.
pub fn read_rgb8(path: &Path) -> Result<Image<u8>> {
    let bytes = error::read(path)?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png)
        .map_err(|e| AppError::format(path, e))?
        .into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Ok(Image::from_fn(w, h, |c, x, y| img.get_pixel(x as u32, y as u32)[c]))
}

/// Reads a PNG with intensities scaled to `[0, 1]`.
pub fn read_rgb(path: &Path) -> Result<Image<f32>> {
    Ok(to_unit(&read_rgb8(path)?))
}

pub fn to_unit(img: &Image<u8>) -> Image<f32> {
    Image::from_fn(img.width(), img.height(), |c, x, y| img.get(c, x, y) as f32 / 255.0)
}

/// Rounds `[0, 1]` intensities to the nearest 8-bit level.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn write_rgb8(path: &Path, img: &Image<u8>) -> Result<()> {
    let (w, h) = (img.width(), img.height());
    let mut buf = image::RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            buf.put_pixel(x as u32, y as u32, image::Rgb([img.get(0, x, y), img.get(1, x, y), img.get(2, x, y)]));
        }
    }
    encode_png(path, &buf)
}

pub fn write_rgb<T: Scalar>(path: &Path, img: &Image<T>) -> Result<()> {
    write_rgb8(path, &Image::from_fn(img.width(), img.height(), |c, x, y| quantize(img.get(c, x, y).to_f64())))
}

pub(crate) fn encode_png(path: &Path, buf: &image::RgbImage) -> Result<()> {
    let mut bytes = Vec::new();
    buf.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
        .map_err(|e| AppError::format(path, e))?;
    error::write(path, bytes)
}
