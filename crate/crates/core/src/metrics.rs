//! Full-reference image quality metrics: PSNR, SSIM, and pixel-domain VIF.
//!
//! All three compare a reference image against a test image of the same
//! dimensions and accumulate in f64. PSNR and SSIM are symmetric in their
//! arguments; VIF is not (the reference drives the information budget).

use crate::error::{Error, Result};
use crate::image::Image;

/// SSIM window: 11x11 Gaussian, sigma 1.5.
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
/// Dynamic range of unit-interval images.
const SSIM_L: f64 = 1.0;

/// VIF noise-channel variance, calibrated for data on a [0, 255] scale.
const VIF_SIGMA_NSQ: f64 = 2.0;
/// Smallest image VIF accepts; below this the coarse scales are empty.
const VIF_MIN_DIM: usize = 32;

/// Bundle of the three scores for one (reference, test) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityScore {
    /// Decibels; `f64::INFINITY` when the images are identical.
    pub psnr: f64,
    pub ssim: f64,
    pub vif: f64,
}

/// Computes all three metrics at once.
pub fn quality(reference: &Image, test: &Image) -> Result<QualityScore> {
    Ok(QualityScore {
        psnr: psnr(reference, test, 1.0)?,
        ssim: ssim(reference, test)?,
        vif: vif(reference, test)?,
    })
}

fn check_dims(reference: &Image, test: &Image) -> Result<()> {
    if reference.width() != test.width() || reference.height() != test.height() {
        return Err(Error::invalid(format!(
            "metric inputs differ in size: {}x{} vs {}x{}",
            reference.width(),
            reference.height(),
            test.width(),
            test.height()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB: 10*log10(peak^2 / MSE). Identical
/// images have zero MSE and map to the `f64::INFINITY` sentinel.
pub fn psnr(reference: &Image, test: &Image, peak: f64) -> Result<f64> {
    check_dims(reference, test)?;
    if !(peak > 0.0) {
        return Err(Error::invalid("psnr peak must be positive"));
    }
    let mut sq = 0.0f64;
    for (&a, &b) in reference.data().iter().zip(test.data()) {
        let d = a as f64 - b as f64;
        sq += d * d;
    }
    let mse = sq / reference.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Mean local structural similarity over all fully-interior 11x11 windows.
pub fn ssim(reference: &Image, test: &Image) -> Result<f64> {
    check_dims(reference, test)?;
    if reference.width() < SSIM_WINDOW || reference.height() < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "ssim needs images of at least {0}x{0}",
            SSIM_WINDOW
        )));
    }
    let a = Mat::from_image(reference, 1.0);
    let b = Mat::from_image(test, 1.0);
    let win = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);

    let mu1 = a.filter_valid(&win);
    let mu2 = b.filter_valid(&win);
    let s1 = a.mul(&a).filter_valid(&win).sub_sq(&mu1);
    let s2 = b.mul(&b).filter_valid(&win).sub_sq(&mu2);
    let s12 = a.mul(&b).filter_valid(&win).sub_prod(&mu1, &mu2);

    let c1 = (SSIM_K1 * SSIM_L).powi(2);
    let c2 = (SSIM_K2 * SSIM_L).powi(2);
    let mut sum = 0.0f64;
    for i in 0..mu1.v.len() {
        let (m1, m2) = (mu1.v[i], mu2.v[i]);
        let num = (2.0 * m1 * m2 + c1) * (2.0 * s12.v[i] + c2);
        let den = (m1 * m1 + m2 * m2 + c1) * (s1.v[i] + s2.v[i] + c2);
        sum += num / den;
    }
    Ok(sum / mu1.v.len() as f64)
}

/// Pixel-domain visual information fidelity over a four-level Gaussian
/// pyramid (windows 17/9/5/3, sigma N/5, filter-then-2:1-decimate between
/// levels). Identical inputs give 1; constant inputs carry no information
/// and are defined as 1 as well.
pub fn vif(reference: &Image, test: &Image) -> Result<f64> {
    check_dims(reference, test)?;
    if reference.width() < VIF_MIN_DIM || reference.height() < VIF_MIN_DIM {
        return Err(Error::invalid(format!(
            "vif needs images of at least {0}x{0}",
            VIF_MIN_DIM
        )));
    }
    // The noise-variance constant assumes 8-bit-range data.
    let mut r = Mat::from_image(reference, 255.0);
    let mut t = Mat::from_image(test, 255.0);
    let mut num = 0.0f64;
    let mut den = 0.0f64;

    for scale in 1..=4u32 {
        let n = 2usize.pow(4 - scale + 1) + 1;
        let win = gaussian_taps(n, n as f64 / 5.0);
        if scale > 1 {
            if r.w < n || r.h < n {
                break;
            }
            r = r.filter_valid(&win).decimate2();
            t = t.filter_valid(&win).decimate2();
        }
        if r.w < n || r.h < n {
            continue;
        }
        let mu1 = r.filter_valid(&win);
        let mu2 = t.filter_valid(&win);
        let s1 = r.mul(&r).filter_valid(&win).sub_sq(&mu1);
        let s2 = t.mul(&t).filter_valid(&win).sub_sq(&mu2);
        let s12 = r.mul(&t).filter_valid(&win).sub_prod(&mu1, &mu2);

        for i in 0..mu1.v.len() {
            let sigma1 = s1.v[i].max(0.0);
            let sigma2 = s2.v[i].max(0.0);
            // Per-window gain of the distortion channel test = g*ref + v.
            let mut g = s12.v[i] / (sigma1 + 1e-10);
            let mut sv = sigma2 - g * s12.v[i];
            if sigma1 < 1e-10 {
                g = 0.0;
                sv = sigma2;
            }
            if sigma2 < 1e-10 {
                g = 0.0;
                sv = 0.0;
            }
            if g < 0.0 {
                sv = sigma2;
                g = 0.0;
            }
            let sv = sv.max(1e-10);
            num += (1.0 + g * g * sigma1 / (sv + VIF_SIGMA_NSQ)).log10();
            den += (1.0 + sigma1 / VIF_SIGMA_NSQ).log10();
        }
    }
    if den == 0.0 {
        return Ok(1.0);
    }
    Ok(num / den)
}

/// Normalized 1D Gaussian taps; the separable product reproduces the usual
/// normalized 2D window exactly.
fn gaussian_taps(n: usize, sigma: f64) -> Vec<f64> {
    let c = (n as f64 - 1.0) / 2.0;
    let mut taps: Vec<f64> = (0..n)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Small f64 matrix for windowed statistics.
#[derive(Clone)]
struct Mat {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

impl Mat {
    fn from_image(img: &Image, scale: f64) -> Mat {
        Mat {
            w: img.width(),
            h: img.height(),
            v: img.data().iter().map(|&x| x as f64 * scale).collect(),
        }
    }

    fn mul(&self, other: &Mat) -> Mat {
        Mat {
            w: self.w,
            h: self.h,
            v: self.v.iter().zip(&other.v).map(|(a, b)| a * b).collect(),
        }
    }

    /// self - mu^2, elementwise (local variance from raw second moments).
    fn sub_sq(mut self, mu: &Mat) -> Mat {
        for (v, m) in self.v.iter_mut().zip(&mu.v) {
            *v -= m * m;
        }
        self
    }

    /// self - mu1*mu2, elementwise (local covariance).
    fn sub_prod(mut self, mu1: &Mat, mu2: &Mat) -> Mat {
        for ((v, a), b) in self.v.iter_mut().zip(&mu1.v).zip(&mu2.v) {
            *v -= a * b;
        }
        self
    }

    /// Separable valid-mode filtering: output is (w-n+1) x (h-n+1).
    fn filter_valid(&self, taps: &[f64]) -> Mat {
        let n = taps.len();
        let ow = self.w - n + 1;
        // Horizontal pass.
        let mut hp = vec![0.0f64; ow * self.h];
        for row in 0..self.h {
            let src = &self.v[row * self.w..(row + 1) * self.w];
            let dst = &mut hp[row * ow..(row + 1) * ow];
            for (col, d) in dst.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, &t) in taps.iter().enumerate() {
                    acc += t * src[col + k];
                }
                *d = acc;
            }
        }
        // Vertical pass.
        let oh = self.h - n + 1;
        let mut v = vec![0.0f64; ow * oh];
        for row in 0..oh {
            for (k, &t) in taps.iter().enumerate() {
                let src = &hp[(row + k) * ow..(row + k + 1) * ow];
                let dst = &mut v[row * ow..(row + 1) * ow];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += t * s;
                }
            }
        }
        Mat { w: ow, h: oh, v }
    }

    /// Keeps every other row and column, starting from the first.
    fn decimate2(&self) -> Mat {
        let ow = self.w.div_ceil(2);
        let oh = self.h.div_ceil(2);
        let mut v = Vec::with_capacity(ow * oh);
        for row in (0..self.h).step_by(2) {
            for col in (0..self.w).step_by(2) {
                v.push(self.v[row * self.w + col]);
            }
        }
        Mat { w: ow, h: oh, v }
    }
}
