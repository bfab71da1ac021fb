//! Grayscale image container and geometry helpers.
//!
//! Pixels are `f32` intensities in `[0, 1]`, stored row-major. All
//! resampling, patching, and file I/O in the crate goes through [`Image`].

mod io;
mod patches;
mod resample;

pub use io::{load_grayscale, save_grayscale};
pub use patches::{Patch, PatchSet};
pub use resample::{degrade, resize, ResampleKernel};

use crate::error::{Error, Result};

/// Row-major grayscale image with `f32` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Image {
    /// Creates an image from raw row-major samples.
    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be nonzero"));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Image {
            width,
            height,
            data,
        })
    }

    /// Creates an image filled with a constant value.
    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self> {
        Self::from_vec(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col] = value;
    }

    /// Samples with coordinates clamped to the valid range, so reads just
    /// outside the border replicate the edge pixel.
    #[inline]
    pub fn get_clamped(&self, row: isize, col: isize) -> f32 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.data[r * self.width + c]
    }

    /// Bilinear sample at fractional (row, col). Out-of-range coordinates
    /// clamp to the border.
    pub fn sample_bilinear(&self, row: f32, col: f32) -> f32 {
        let r0 = row.floor();
        let c0 = col.floor();
        let fr = row - r0;
        let fc = col - c0;
        let r0 = r0 as isize;
        let c0 = c0 as isize;
        let v00 = self.get_clamped(r0, c0);
        let v01 = self.get_clamped(r0, c0 + 1);
        let v10 = self.get_clamped(r0 + 1, c0);
        let v11 = self.get_clamped(r0 + 1, c0 + 1);
        let top = v00 + (v01 - v00) * fc;
        let bot = v10 + (v11 - v10) * fc;
        top + (bot - top) * fr
    }

    /// Copies the `width`×`height` window whose top-left corner is
    /// (`top`, `left`). The window must lie fully inside the image.
    pub fn crop(&self, top: usize, left: usize, width: usize, height: usize) -> Result<Image> {
        if left + width > self.width || top + height > self.height {
            return Err(Error::invalid(format!(
                "crop {}x{}+{}+{} exceeds {}x{} image",
                width, height, left, top, self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            let start = (top + r) * self.width + left;
            data.extend_from_slice(&self.data[start..start + width]);
        }
        Image::from_vec(width, height, data)
    }

    /// Pads by mirror reflection without repeating the border sample
    /// (`cba|abcd|dcb`). `margin` must be smaller than both dimensions.
    pub fn pad_reflect(&self, margin: usize) -> Result<Image> {
        if margin >= self.width || margin >= self.height {
            return Err(Error::invalid(format!(
                "reflect margin {} too large for {}x{} image",
                margin, self.width, self.height
            )));
        }
        let w = self.width + 2 * margin;
        let h = self.height + 2 * margin;
        let reflect = |i: isize, n: isize| -> usize {
            // Reflection about the first/last sample: -1 -> 1, n -> n-2.
            let mut i = i;
            if i < 0 {
                i = -i;
            }
            if i >= n {
                i = 2 * (n - 1) - i;
            }
            i as usize
        };
        let mut data = Vec::with_capacity(w * h);
        for r in 0..h {
            let sr = reflect(r as isize - margin as isize, self.height as isize);
            for c in 0..w {
                let sc = reflect(c as isize - margin as isize, self.width as isize);
                data.push(self.data[sr * self.width + sc]);
            }
        }
        Image::from_vec(w, h, data)
    }

    /// Clamps every sample into `[0, 1]`.
    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }

    /// Mean intensity.
    pub fn mean(&self) -> f64 {
        let sum: f64 = self.data.iter().map(|&v| v as f64).sum();
        sum / self.data.len() as f64
    }
}
