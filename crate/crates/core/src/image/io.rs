//! PNG / PGM load and save.
//!
//! Files are read as 8- or 16-bit grayscale; color inputs are reduced with
//! BT.601 luma (0.299 R + 0.587 G + 0.114 B). Saving quantizes to 8-bit.

use std::path::Path;

use image::DynamicImage;

use crate::error::{Error, Result};
use crate::image::Image;

/// Loads a PNG or PGM file as a grayscale [`Image`] with samples in `[0, 1]`.
pub fn load_grayscale<P: AsRef<Path>>(path: P) -> Result<Image> {
    let path = path.as_ref();
    let dynimg = image::open(path).map_err(|source| Error::ImageFile {
        path: path.to_path_buf(),
        source,
    })?;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    let data: Vec<f32> = match dynimg {
        DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| p.0[0] as f32 / 255.0).collect(),
        DynamicImage::ImageLuma16(buf) => {
            buf.pixels().map(|p| p.0[0] as f32 / 65535.0).collect()
        }
        DynamicImage::ImageLumaA8(buf) => buf.pixels().map(|p| p.0[0] as f32 / 255.0).collect(),
        other => {
            let rgb = other.to_rgb8();
            rgb.pixels()
                .map(|p| {
                    let [r, g, b] = p.0;
                    (0.299 * r as f32 + 0.587 * g as f32 + 0.114 * b as f32) / 255.0
                })
                .collect()
        }
    };
    Image::from_vec(w, h, data)
}

/// Saves as 8-bit grayscale; the format follows the file extension
/// (`.png` or `.pgm`). Samples are clamped to `[0, 1]` and rounded.
pub fn save_grayscale<P: AsRef<Path>>(img: &Image, path: P) -> Result<()> {
    let path = path.as_ref();
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, bytes)
        .expect("buffer length matches dimensions");
    buf.save(path).map_err(|source| Error::ImageFile {
        path: path.to_path_buf(),
        source,
    })
}
