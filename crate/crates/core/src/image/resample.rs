//! Separable bilinear / bicubic resampling and the paired
//! downscale-then-upscale degradation used to build training data.

use crate::error::{Error, Result};
use crate::image::Image;

/// Interpolation kernel used by [`resize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleKernel {
    Bilinear,
    Bicubic,
}

/// Catmull-Rom cubic (a = -0.5) evaluated at the four taps around a sample
/// with fractional offset `t` in `[0, 1)`. Returns weights for source
/// indices `i-1, i, i+1, i+2`. At `t == 0` the weights are exactly
/// `(0, 1, 0, 0)`, so identity resizes are bitwise no-ops.
#[inline]
fn cubic_weights(t: f32) -> [f32; 4] {
    const A: f32 = -0.5;
    let t2 = t * t;
    let t3 = t2 * t;
    [
        A * t3 - 2.0 * A * t2 + A * t,
        (A + 2.0) * t3 - (A + 3.0) * t2 + 1.0,
        -(A + 2.0) * t3 + (2.0 * A + 3.0) * t2 - A * t,
        -A * t3 + A * t2,
    ]
}

#[inline]
fn linear_weights(t: f32) -> [f32; 2] {
    [1.0 - t, t]
}

/// Maps destination index `i` to a source coordinate under pixel-center
/// alignment: `(i + 0.5) * src / dst - 0.5`.
#[inline]
fn src_coord(i: usize, src: usize, dst: usize) -> f32 {
    (i as f32 + 0.5) * (src as f32 / dst as f32) - 0.5
}

struct TapPlan {
    // Per destination index: first source tap and its weights.
    base: Vec<isize>,
    weights: Vec<f32>,
    taps: usize,
}

fn plan_axis(src: usize, dst: usize, kernel: ResampleKernel) -> TapPlan {
    let taps = match kernel {
        ResampleKernel::Bilinear => 2,
        ResampleKernel::Bicubic => 4,
    };
    let mut base = Vec::with_capacity(dst);
    let mut weights = Vec::with_capacity(dst * taps);
    for i in 0..dst {
        let x = src_coord(i, src, dst);
        let x0 = x.floor();
        let t = x - x0;
        let x0 = x0 as isize;
        match kernel {
            ResampleKernel::Bilinear => {
                base.push(x0);
                weights.extend_from_slice(&linear_weights(t));
            }
            ResampleKernel::Bicubic => {
                base.push(x0 - 1);
                weights.extend_from_slice(&cubic_weights(t));
            }
        }
    }
    TapPlan {
        base,
        weights,
        taps,
    }
}

/// Resizes to `dst_width`×`dst_height` with the given kernel, as two
/// separable passes (horizontal then vertical). Taps outside the source
/// clamp to the edge sample; output is clamped to `[0, 1]`.
pub fn resize(
    img: &Image,
    dst_width: usize,
    dst_height: usize,
    kernel: ResampleKernel,
) -> Result<Image> {
    if dst_width == 0 || dst_height == 0 {
        return Err(Error::invalid("resize target must be nonzero"));
    }

    // Horizontal pass: src_w x src_h -> dst_w x src_h.
    let hplan = plan_axis(img.width(), dst_width, kernel);
    let mut mid = vec![0.0f32; dst_width * img.height()];
    let src_w = img.width() as isize;
    for r in 0..img.height() {
        let row = &img.data()[r * img.width()..(r + 1) * img.width()];
        for (i, &b) in hplan.base.iter().enumerate() {
            let w = &hplan.weights[i * hplan.taps..(i + 1) * hplan.taps];
            let mut acc = 0.0f32;
            for (k, &wk) in w.iter().enumerate() {
                let c = (b + k as isize).clamp(0, src_w - 1) as usize;
                acc += wk * row[c];
            }
            mid[r * dst_width + i] = acc;
        }
    }

    // Vertical pass: dst_w x src_h -> dst_w x dst_h.
    let vplan = plan_axis(img.height(), dst_height, kernel);
    let mut out = vec![0.0f32; dst_width * dst_height];
    let src_h = img.height() as isize;
    for (i, &b) in vplan.base.iter().enumerate() {
        let w = &vplan.weights[i * vplan.taps..(i + 1) * vplan.taps];
        for c in 0..dst_width {
            let mut acc = 0.0f32;
            for (k, &wk) in w.iter().enumerate() {
                let r = (b + k as isize).clamp(0, src_h - 1) as usize;
                acc += wk * mid[r * dst_width + c];
            }
            out[i * dst_width + c] = acc.clamp(0.0, 1.0);
        }
    }

    Image::from_vec(dst_width, dst_height, out)
}

/// Simulates a low-resolution acquisition: bicubic downscale by `factor`
/// (floored dimensions) followed by bicubic upscale back to the original
/// size. `factor` must be at least 2 and leave both floored dims nonzero.
pub fn degrade(img: &Image, factor: u32) -> Result<Image> {
    if factor < 2 {
        return Err(Error::invalid("degradation factor must be >= 2"));
    }
    let f = factor as usize;
    let lw = img.width() / f;
    let lh = img.height() / f;
    if lw == 0 || lh == 0 {
        return Err(Error::invalid(format!(
            "factor {} collapses {}x{} image",
            factor,
            img.width(),
            img.height()
        )));
    }
    let low = resize(img, lw, lh, ResampleKernel::Bicubic)?;
    resize(&low, img.width(), img.height(), ResampleKernel::Bicubic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..w * h).map(|_| rng.random::<f32>()).collect();
        Image::from_vec(w, h, data).unwrap()
    }

    #[test]
    fn cubic_weights_partition_unity() {
        // Any cubic-convolution kernel must reproduce constants, i.e. the
        // four weights sum to 1 at every offset.
        for i in 0..=100 {
            let t = i as f32 / 100.0;
            let w = cubic_weights(t);
            let s: f32 = w.iter().sum();
            assert!((s - 1.0).abs() < 1e-6, "t={} sum={}", t, s);
        }
        assert_eq!(cubic_weights(0.0), [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn cubic_weights_match_closed_form() {
        // Independent evaluation of the piecewise kernel
        //   W(x) = (a+2)|x|^3 - (a+3)|x|^2 + 1          for |x| <= 1
        //   W(x) = a|x|^3 - 5a|x|^2 + 8a|x| - 4a        for 1 < |x| < 2
        // at distances t+1, t, 1-t, 2-t from the sample point.
        let kernel = |x: f32| -> f32 {
            const A: f32 = -0.5;
            let x = x.abs();
            if x <= 1.0 {
                (A + 2.0) * x.powi(3) - (A + 3.0) * x.powi(2) + 1.0
            } else if x < 2.0 {
                A * x.powi(3) - 5.0 * A * x.powi(2) + 8.0 * A * x - 4.0 * A
            } else {
                0.0
            }
        };
        for i in 0..=20 {
            let t = i as f32 / 20.0 * 0.999;
            let w = cubic_weights(t);
            let expect = [kernel(t + 1.0), kernel(t), kernel(1.0 - t), kernel(2.0 - t)];
            for (a, b) in w.iter().zip(expect.iter()) {
                assert!((a - b).abs() < 1e-5, "t={} {:?} vs {:?}", t, w, expect);
            }
        }
    }

    #[test]
    fn identity_resize_is_bitwise_noop() {
        for seed in 0..4 {
            let img = random_image(17, 11, seed);
            for kernel in [ResampleKernel::Bilinear, ResampleKernel::Bicubic] {
                let out = resize(&img, 17, 11, kernel).unwrap();
                assert_eq!(out.data(), img.data());
            }
        }
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = Image::filled(231, 231, 0.7).unwrap();
        for kernel in [ResampleKernel::Bilinear, ResampleKernel::Bicubic] {
            let down = resize(&img, 115, 115, kernel).unwrap();
            for &v in down.data() {
                assert!((v - 0.7).abs() < 1e-6);
            }
            let up = resize(&down, 231, 231, kernel).unwrap();
            for &v in up.data() {
                assert!((v - 0.7).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn downscale_dims_floor() {
        let img = random_image(231, 231, 1);
        let d = degrade(&img, 2).unwrap();
        assert_eq!(d.width(), 231);
        assert_eq!(d.height(), 231);
        let low = resize(&img, 231 / 2, 231 / 2, ResampleKernel::Bicubic).unwrap();
        assert_eq!(low.width(), 115);
        assert_eq!(low.height(), 115);
        // 231 / 16 floors to 14.
        assert_eq!(231usize / 16, 14);
        let tiny = resize(&img, 14, 14, ResampleKernel::Bicubic).unwrap();
        assert_eq!(tiny.width(), 14);
    }

    #[test]
    fn degrade_rejects_bad_factors() {
        let img = random_image(16, 16, 2);
        assert!(degrade(&img, 1).is_err());
        assert!(degrade(&img, 32).is_err());
    }

    #[test]
    fn bilinear_halving_matches_hand_average() {
        // 4x1 row [0, 1, 2, 3] downscaled to 2x1: dst 0 samples src
        // coordinate (0.5)*2 - 0.5 = 0.5 -> (0+1)/2; dst 1 -> 2.5 -> (2+3)/2.
        // Scaled into [0,1] to dodge the output clamp.
        let img = Image::from_vec(4, 1, vec![0.0, 0.1, 0.2, 0.3]).unwrap();
        let out = resize(&img, 2, 1, ResampleKernel::Bilinear).unwrap();
        assert!((out.get(0, 0) - 0.05).abs() < 1e-6);
        assert!((out.get(0, 1) - 0.25).abs() < 1e-6);
    }

    #[test]
    fn output_clamped_to_unit() {
        // Bicubic overshoots at step edges; outputs must stay in [0,1].
        let mut data = vec![0.0f32; 16];
        for (i, v) in data.iter_mut().enumerate() {
            if i % 4 >= 2 {
                *v = 1.0;
            }
        }
        let img = Image::from_vec(4, 4, data).unwrap();
        let up = resize(&img, 9, 9, ResampleKernel::Bicubic).unwrap();
        for &v in up.data() {
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn separable_matches_direct_2d() {
        // Oracle: direct 2D tensor-product interpolation without the
        // separable factorization. f64 accumulation, same clamp rules.
        let img = random_image(13, 9, 42);
        let (dw, dh) = (29, 17);
        let out = resize(&img, dw, dh, ResampleKernel::Bicubic).unwrap();
        for r in 0..dh {
            for c in 0..dw {
                let y = src_coord(r, img.height(), dh);
                let x = src_coord(c, img.width(), dw);
                let y0 = y.floor();
                let x0 = x.floor();
                let wy = cubic_weights(y - y0);
                let wx = cubic_weights(x - x0);
                let mut acc = 0.0f64;
                for (ky, &wyk) in wy.iter().enumerate() {
                    for (kx, &wxk) in wx.iter().enumerate() {
                        let sr = (y0 as isize - 1 + ky as isize)
                            .clamp(0, img.height() as isize - 1);
                        let sc =
                            (x0 as isize - 1 + kx as isize).clamp(0, img.width() as isize - 1);
                        acc += (wyk as f64)
                            * (wxk as f64)
                            * img.get(sr as usize, sc as usize) as f64;
                    }
                }
                let expect = acc.clamp(0.0, 1.0) as f32;
                assert!(
                    (out.get(r, c) - expect).abs() < 1e-5,
                    "({}, {}): {} vs {}",
                    r,
                    c,
                    out.get(r, c),
                    expect
                );
            }
        }
    }
}
