//! Lossless PNG import/export for human inspection of images and triggers.
//!
//! The raw container format is the source of truth for all persisted data;
//! PNG output quantizes to 8 bits and exists only for eyeballing results.

use crate::error::{CoreError, Result};
use crate::image::ImageTensor;
use crate::Real;
use image::{GrayImage, RgbImage};
use ndarray::Array3;
use std::path::Path;

/// Writes an image as RGB (C = 3) or grayscale (C = 1) PNG.
pub fn export_png<F: Real>(img: &ImageTensor<F>, path: &Path) -> Result<()> {
    let (h, w, c) = img.dim();
    let to_u8 = |v: F| (v.to_f64().clamp(0.0, 1.0) * 255.0).round() as u8;
    let ok = match c {
        3 => {
            let mut out = RgbImage::new(w as u32, h as u32);
            for i in 0..h {
                for j in 0..w {
                    let px = image::Rgb([
                        to_u8(img.data()[[i, j, 0]]),
                        to_u8(img.data()[[i, j, 1]]),
                        to_u8(img.data()[[i, j, 2]]),
                    ]);
                    out.put_pixel(j as u32, i as u32, px);
                }
            }
            out.save(path)
        }
        1 => {
            let mut out = GrayImage::new(w as u32, h as u32);
            for i in 0..h {
                for j in 0..w {
                    out.put_pixel(j as u32, i as u32, image::Luma([to_u8(img.data()[[i, j, 0]])]));
                }
            }
            out.save(path)
        }
        _ => unreachable!("ImageTensor enforces C in {{1, 3}}"),
    };
    ok.map_err(|e| CoreError::Format {
        path: path.display().to_string(),
        detail: format!("png encode failed: {e}"),
    })
}

/// Reads a PNG into an image tensor, mapping 8-bit values to `[0, 1]`.
pub fn import_png<F: Real>(path: &Path) -> Result<ImageTensor<F>> {
    let img = image::open(path).map_err(|e| CoreError::Format {
        path: path.display().to_string(),
        detail: format!("png decode failed: {e}"),
    })?;
    let rgb = img.to_rgb8();
    let (w, h) = rgb.dimensions();
    let mut data = Array3::<F>::zeros((h as usize, w as usize, 3));
    for i in 0..h {
        for j in 0..w {
            let px = rgb.get_pixel(j, i);
            for k in 0..3 {
                data[[i as usize, j as usize, k]] = F::from_f64(px.0[k] as f64 / 255.0);
            }
        }
    }
    ImageTensor::new(data)
}
