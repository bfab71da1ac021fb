//! Iris recognition pipeline: annotation-driven preprocessing, rubber-sheet
//! normalization, Log-Gabor phase coding, shifted Hamming matching, and EER
//! computation.
//!
//! Images enter as annotated full frames, are rescaled so every sclera has
//! the same radius, cropped to a square around the pupil, unwrapped to a
//! polar strip, and encoded to binary phase codes that are compared with a
//! rotation-tolerant normalized Hamming distance.

mod code;
mod verify;

pub use code::{hamming_distance, log_gabor_encode, IrisCode, LogGaborParams};
pub use verify::{
    compute_eer, run_verification, score_pairs, PairScore, Scenario, VerificationConfig,
    VerificationResult, VerificationSample,
};

use crate::error::{Error, Result};
use crate::image::{resize, Image, ResampleKernel};

/// Radial rows in the normalized strip.
pub const STRIP_ROWS: usize = 20;
/// Angular columns in the normalized strip.
pub const STRIP_COLS: usize = 240;
/// Side of the square region extracted around the pupil center.
pub const CROP_SIZE: usize = 231;
/// Sclera radius every image is rescaled to before cropping.
pub const DEFAULT_TARGET_SCLERA_RADIUS: f64 = 105.0;

/// A circle in pixel coordinates; `cx` is the column, `cy` the row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

impl Circle {
    pub fn new(cx: f64, cy: f64, r: f64) -> Circle {
        Circle { cx, cy, r }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.cx, y - self.cy);
        dx * dx + dy * dy < self.r * self.r
    }
}

/// Manually annotated pupil and sclera boundary circles for one image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationAnnotation {
    pub pupil: Circle,
    pub sclera: Circle,
}

impl SegmentationAnnotation {
    pub fn new(pupil: Circle, sclera: Circle) -> Result<SegmentationAnnotation> {
        let ann = SegmentationAnnotation { pupil, sclera };
        ann.validate()?;
        Ok(ann)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pupil.r > 0.0) {
            return Err(Error::InvalidAnnotation(
                "pupil radius must be positive".into(),
            ));
        }
        if !(self.pupil.r < self.sclera.r) {
            return Err(Error::InvalidAnnotation(
                "pupil radius must be smaller than sclera radius".into(),
            ));
        }
        if !self.sclera.contains(self.pupil.cx, self.pupil.cy) {
            return Err(Error::InvalidAnnotation(
                "pupil center must lie inside the sclera circle".into(),
            ));
        }
        Ok(())
    }
}

/// A rescaled 231x231 crop with its annotation expressed in crop
/// coordinates.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub image: Image,
    pub annotation: SegmentationAnnotation,
}

/// Rescales the frame so the sclera radius equals `target_sclera_radius`
/// (bicubic), then crops [`CROP_SIZE`] pixels square around the scaled
/// pupil center. Returns `None` when the crop would leave the frame; such
/// images are discarded upstream.
pub fn preprocess(
    img: &Image,
    annotation: &SegmentationAnnotation,
    target_sclera_radius: f64,
) -> Result<Option<Preprocessed>> {
    annotation.validate()?;
    if !(target_sclera_radius > 0.0) {
        return Err(Error::invalid("target sclera radius must be positive"));
    }
    let scale = target_sclera_radius / annotation.sclera.r;
    let new_w = ((img.width() as f64 * scale).round() as usize).max(1);
    let new_h = ((img.height() as f64 * scale).round() as usize).max(1);
    let scaled = resize(img, new_w, new_h, ResampleKernel::Bicubic)?;

    // Pixel-center mapping keeps circle centers aligned with the resampled
    // grid; radii scale by the mean of the realized axis factors.
    let sx = new_w as f64 / img.width() as f64;
    let sy = new_h as f64 / img.height() as f64;
    let map = |c: &Circle| Circle {
        cx: (c.cx + 0.5) * sx - 0.5,
        cy: (c.cy + 0.5) * sy - 0.5,
        r: c.r * 0.5 * (sx + sy),
    };
    let pupil = map(&annotation.pupil);
    let sclera = map(&annotation.sclera);

    let half = (CROP_SIZE / 2) as i64;
    let left = pupil.cx.round() as i64 - half;
    let top = pupil.cy.round() as i64 - half;
    if left < 0
        || top < 0
        || left + CROP_SIZE as i64 > new_w as i64
        || top + CROP_SIZE as i64 > new_h as i64
    {
        return Ok(None);
    }
    let image = scaled.crop(top as usize, left as usize, CROP_SIZE, CROP_SIZE)?;
    let shift = |c: Circle| Circle {
        cx: c.cx - left as f64,
        cy: c.cy - top as f64,
        r: c.r,
    };
    Ok(Some(Preprocessed {
        image,
        annotation: SegmentationAnnotation {
            pupil: shift(pupil),
            sclera: shift(sclera),
        },
    }))
}

/// Rubber-sheet normalized iris: [`STRIP_ROWS`] x [`STRIP_COLS`] samples
/// taken between the pupil and sclera boundaries, plus a geometric
/// validity mask (false where the sample fell outside the image).
#[derive(Debug, Clone)]
pub struct NormalizedIris {
    /// 240-wide, 20-tall strip; row = radial position, column = angle.
    pub strip: Image,
    /// Row-major, one flag per strip sample.
    pub valid_mask: Vec<bool>,
}

/// Unwraps the annulus between the pupil and sclera circles into the
/// normalized strip. Angle `theta_j = 2*pi*j/240`; the radial coordinate
/// blends linearly between the two boundary points at fraction
/// `(i + 0.5)/20`. Sampling is bilinear with border clamping; the mask
/// records which samples were geometrically inside the image.
pub fn unwrap(img: &Image, annotation: &SegmentationAnnotation) -> Result<NormalizedIris> {
    annotation.validate()?;
    let mut strip = Vec::with_capacity(STRIP_ROWS * STRIP_COLS);
    let mut valid_mask = Vec::with_capacity(STRIP_ROWS * STRIP_COLS);
    let (w, h) = (img.width() as f64, img.height() as f64);
    let mut any_valid = false;
    for i in 0..STRIP_ROWS {
        let f = (i as f64 + 0.5) / STRIP_ROWS as f64;
        for j in 0..STRIP_COLS {
            let theta = std::f64::consts::TAU * j as f64 / STRIP_COLS as f64;
            let (sin, cos) = theta.sin_cos();
            let px = annotation.pupil.cx + annotation.pupil.r * cos;
            let py = annotation.pupil.cy + annotation.pupil.r * sin;
            let sx = annotation.sclera.cx + annotation.sclera.r * cos;
            let sy = annotation.sclera.cy + annotation.sclera.r * sin;
            let x = px + f * (sx - px);
            let y = py + f * (sy - py);
            let inside = x >= 0.0 && x <= w - 1.0 && y >= 0.0 && y <= h - 1.0;
            any_valid |= inside;
            valid_mask.push(inside);
            strip.push(img.sample_bilinear(y as f32, x as f32));
        }
    }
    if !any_valid {
        return Err(Error::InvalidAnnotation(
            "annotation lies entirely outside the image".into(),
        ));
    }
    Ok(NormalizedIris {
        strip: Image::from_vec(STRIP_COLS, STRIP_ROWS, strip)?,
        valid_mask,
    })
}
