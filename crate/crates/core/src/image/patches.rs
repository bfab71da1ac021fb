//! Square patch extraction and overlap-averaged reassembly.

use crate::error::{Error, Result};
use crate::image::Image;

/// A square patch plus the top-left coordinate it was taken from (or is to
/// be written back to).
#[derive(Debug, Clone)]
pub struct Patch {
    pub row: usize,
    pub col: usize,
    pub image: Image,
}

/// A collection of equally sized square patches tagged with anchors.
#[derive(Debug, Clone)]
pub struct PatchSet {
    size: usize,
    patches: Vec<Patch>,
}

/// Anchors `0, stride, 2*stride, ...` for as long as a window of `size`
/// still fits in `extent`. No trailing edge-aligned anchor is added, so the
/// grid may stop short of the far border.
fn grid_anchors(extent: usize, size: usize, stride: usize) -> Vec<usize> {
    let mut anchors = Vec::new();
    let mut a = 0;
    while a + size <= extent {
        anchors.push(a);
        a += stride;
    }
    anchors
}

/// Grid anchors plus, when the grid stops short, a final anchor flush with
/// the far border so the windows jointly cover `0..extent`.
fn covering_anchors(extent: usize, size: usize, stride: usize) -> Vec<usize> {
    let mut anchors = grid_anchors(extent, size, stride);
    let last = extent - size;
    if anchors.last() != Some(&last) {
        anchors.push(last);
    }
    anchors
}

impl PatchSet {
    /// Extracts `size`×`size` patches on a regular grid with the given
    /// stride, anchored at the top-left corner.
    pub fn extract(img: &Image, size: usize, stride: usize) -> Result<PatchSet> {
        Self::extract_with(img, size, stride, grid_anchors)
    }

    /// Like [`extract`](Self::extract) but appends edge-aligned anchors so
    /// every pixel of `img` lies in at least one patch.
    pub fn extract_covering(img: &Image, size: usize, stride: usize) -> Result<PatchSet> {
        Self::extract_with(img, size, stride, covering_anchors)
    }

    fn extract_with(
        img: &Image,
        size: usize,
        stride: usize,
        anchors_fn: fn(usize, usize, usize) -> Vec<usize>,
    ) -> Result<PatchSet> {
        if size == 0 || stride == 0 {
            return Err(Error::invalid("patch size and stride must be nonzero"));
        }
        if size > img.width() || size > img.height() {
            return Err(Error::invalid(format!(
                "patch size {} exceeds {}x{} image",
                size,
                img.width(),
                img.height()
            )));
        }
        let rows = anchors_fn(img.height(), size, stride);
        let cols = anchors_fn(img.width(), size, stride);
        let mut patches = Vec::with_capacity(rows.len() * cols.len());
        for &r in &rows {
            for &c in &cols {
                patches.push(Patch {
                    row: r,
                    col: c,
                    image: img.crop(r, c, size, size)?,
                });
            }
        }
        Ok(PatchSet { size, patches })
    }

    /// Builds a set from already-computed patches. All patches must be
    /// square with the same size.
    pub fn from_patches(patches: Vec<Patch>) -> Result<PatchSet> {
        let size = match patches.first() {
            Some(p) => p.image.width(),
            None => return Err(Error::invalid("empty patch set")),
        };
        for p in &patches {
            if p.image.width() != size || p.image.height() != size {
                return Err(Error::invalid("patches must share a square size"));
            }
        }
        Ok(PatchSet { size, patches })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Patch> {
        self.patches.iter()
    }

    /// Writes every patch back at its anchor into a `width`×`height` canvas,
    /// averaging where patches overlap (accumulation in `f64`). Every output
    /// pixel must be covered by at least one patch.
    pub fn assemble(&self, width: usize, height: usize) -> Result<Image> {
        let mut sum = vec![0.0f64; width * height];
        let mut count = vec![0u32; width * height];
        for p in &self.patches {
            if p.col + self.size > width || p.row + self.size > height {
                return Err(Error::invalid(format!(
                    "patch at ({}, {}) exceeds {}x{} canvas",
                    p.row, p.col, width, height
                )));
            }
            for r in 0..self.size {
                let dst = (p.row + r) * width + p.col;
                let src = &p.image.data()[r * self.size..(r + 1) * self.size];
                for (c, &v) in src.iter().enumerate() {
                    sum[dst + c] += v as f64;
                    count[dst + c] += 1;
                }
            }
        }
        let mut data = Vec::with_capacity(width * height);
        for (i, (&s, &n)) in sum.iter().zip(count.iter()).enumerate() {
            if n == 0 {
                return Err(Error::CoverageGap {
                    row: i / width,
                    col: i % width,
                });
            }
            data.push((s / n as f64) as f32);
        }
        Image::from_vec(width, height, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_anchor_counts() {
        // 33-wide window over 231 with stride 14: anchors 0..=196, 15 total.
        assert_eq!(grid_anchors(231, 33, 14).len(), 15);
        // Stops short: last anchor 196 ends at 229, leaving cols 229..231.
        assert_eq!(*grid_anchors(231, 33, 14).last().unwrap(), 196);
        // No implicit edge anchor even when the grid misses the border.
        assert_eq!(grid_anchors(11, 4, 3), vec![0, 3, 6]);
        assert_eq!(covering_anchors(11, 4, 3), vec![0, 3, 6, 7]);
        // Already flush: no duplicate.
        assert_eq!(covering_anchors(10, 4, 3), vec![0, 3, 6]);
    }

    #[test]
    fn extract_count_matches_grid() {
        let img = Image::filled(231, 231, 0.5).unwrap();
        let set = PatchSet::extract(&img, 33, 14).unwrap();
        assert_eq!(set.len(), 225);
        assert_eq!(set.size(), 33);
    }

    #[test]
    fn assemble_reports_gap_when_grid_stops_short() {
        let img = Image::filled(11, 11, 0.5).unwrap();
        let set = PatchSet::extract(&img, 4, 3).unwrap();
        match set.assemble(11, 11) {
            Err(crate::error::Error::CoverageGap { row: _, col }) => assert_eq!(col, 10),
            other => panic!("expected coverage gap, got {:?}", other),
        }
    }

    #[test]
    fn covering_extract_roundtrips_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let w = rng.random_range(8..40);
            let h = rng.random_range(8..40);
            let data = (0..w * h).map(|_| rng.random::<f32>()).collect();
            let img = Image::from_vec(w, h, data).unwrap();
            let set = PatchSet::extract_covering(&img, 5, 3).unwrap();
            let back = set.assemble(w, h).unwrap();
            // Overlaps average identical samples, which is exact in f64.
            assert_eq!(back.data(), img.data());
        }
    }

    #[test]
    fn assemble_averages_overlap() {
        // Two 2x2 constant patches overlapping in one column.
        let a = Patch {
            row: 0,
            col: 0,
            image: Image::filled(2, 2, 0.2).unwrap(),
        };
        let b = Patch {
            row: 0,
            col: 1,
            image: Image::filled(2, 2, 0.6).unwrap(),
        };
        let set = PatchSet::from_patches(vec![a, b]).unwrap();
        let out = set.assemble(3, 2).unwrap();
        let expect = [0.2, 0.4, 0.6, 0.2, 0.4, 0.6];
        for (got, want) in out.data().iter().zip(expect.iter()) {
            assert!((got - want).abs() < 1e-7);
        }
    }

    #[test]
    fn from_patches_rejects_mixed_sizes() {
        let a = Patch {
            row: 0,
            col: 0,
            image: Image::filled(2, 2, 0.0).unwrap(),
        };
        let b = Patch {
            row: 0,
            col: 0,
            image: Image::filled(3, 3, 0.0).unwrap(),
        };
        assert!(PatchSet::from_patches(vec![a, b]).is_err());
    }
}
