//! Python bindings: grayscale images with resampling, quality metrics, the
//! iris verification pipeline, super-resolution models, and the synthetic
//! corpus generator. Images travel as flat `list[float]` buffers in [0, 1].

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use irissr::harness;
use irissr::harness::{Method, SynthConfig, TrainedModel};
use irissr::image::{self, Image, ResampleKernel};
use irissr::iris;
use irissr::iris::{Circle, SegmentationAnnotation};
use irissr::metrics;

fn err(e: irissr::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn kernel_from(name: &str) -> PyResult<ResampleKernel> {
    match name {
        "bilinear" => Ok(ResampleKernel::Bilinear),
        "bicubic" => Ok(ResampleKernel::Bicubic),
        _ => Err(PyValueError::new_err(format!(
            "unknown kernel '{}' (expected 'bilinear' or 'bicubic')",
            name
        ))),
    }
}

/// Grayscale image with float samples in [0, 1], row-major.
#[pyclass(name = "Image", module = "irissr_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PyImage {
    inner: Image,
}

#[pymethods]
impl PyImage {
    #[new]
    fn new(width: usize, height: usize, data: Vec<f32>) -> PyResult<Self> {
        Ok(PyImage {
            inner: Image::from_vec(width, height, data).map_err(err)?,
        })
    }

    #[staticmethod]
    fn filled(width: usize, height: usize, value: f32) -> PyResult<Self> {
        Ok(PyImage {
            inner: Image::filled(width, height, value).map_err(err)?,
        })
    }

    /// Loads a PNG/PGM file, converting to grayscale if needed.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyImage {
            inner: image::load_grayscale(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        image::save_grayscale(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    /// Row-major copy of the pixel buffer.
    fn data(&self) -> Vec<f32> {
        self.inner.data().to_vec()
    }

    fn get(&self, row: usize, col: usize) -> PyResult<f32> {
        if row >= self.inner.height() || col >= self.inner.width() {
            return Err(PyValueError::new_err(format!(
                "pixel ({}, {}) outside {}x{} image",
                row,
                col,
                self.inner.width(),
                self.inner.height()
            )));
        }
        Ok(self.inner.get(row, col))
    }

    fn crop(&self, top: usize, left: usize, width: usize, height: usize) -> PyResult<Self> {
        Ok(PyImage {
            inner: self.inner.crop(top, left, width, height).map_err(err)?,
        })
    }

    #[pyo3(signature = (width, height, kernel = "bicubic"))]
    fn resize(&self, width: usize, height: usize, kernel: &str) -> PyResult<Self> {
        Ok(PyImage {
            inner: image::resize(&self.inner, width, height, kernel_from(kernel)?)
                .map_err(err)?,
        })
    }

    /// Bicubic downscale by `factor` followed by bicubic upscale back to
    /// the original size (the simulated low-resolution acquisition).
    fn degrade(&self, factor: u32) -> PyResult<Self> {
        Ok(PyImage {
            inner: image::degrade(&self.inner, factor).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!("Image({}x{})", self.inner.width(), self.inner.height())
    }
}

/// Pupil and sclera boundary circles in pixel coordinates.
#[pyclass(name = "Annotation", module = "irissr_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PyAnnotation {
    inner: SegmentationAnnotation,
}

#[pymethods]
impl PyAnnotation {
    #[new]
    fn new(
        pupil_cx: f64,
        pupil_cy: f64,
        pupil_r: f64,
        sclera_cx: f64,
        sclera_cy: f64,
        sclera_r: f64,
    ) -> PyResult<Self> {
        Ok(PyAnnotation {
            inner: SegmentationAnnotation::new(
                Circle::new(pupil_cx, pupil_cy, pupil_r),
                Circle::new(sclera_cx, sclera_cy, sclera_r),
            )
            .map_err(err)?,
        })
    }

    /// (cx, cy, r) of the pupil circle.
    #[getter]
    fn pupil(&self) -> (f64, f64, f64) {
        let c = &self.inner.pupil;
        (c.cx, c.cy, c.r)
    }

    /// (cx, cy, r) of the sclera circle.
    #[getter]
    fn sclera(&self) -> (f64, f64, f64) {
        let c = &self.inner.sclera;
        (c.cx, c.cy, c.r)
    }

    fn __repr__(&self) -> String {
        format!(
            "Annotation(pupil={:?}, sclera={:?})",
            self.pupil(),
            self.sclera()
        )
    }
}

/// Rubber-sheet normalized iris: a 240x20 strip plus a validity mask.
#[pyclass(name = "NormalizedIris", module = "irissr_py")]
pub struct PyNormalizedIris {
    inner: iris::NormalizedIris,
}

#[pymethods]
impl PyNormalizedIris {
    #[getter]
    fn strip(&self) -> PyImage {
        PyImage {
            inner: self.inner.strip.clone(),
        }
    }

    /// Row-major sample validity flags (length 20*240).
    #[getter]
    fn valid_mask(&self) -> Vec<bool> {
        self.inner.valid_mask.clone()
    }
}

/// Binary iris code: 2 phase bits per sample plus a usability mask.
#[pyclass(name = "IrisCode", module = "irissr_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PyIrisCode {
    inner: iris::IrisCode,
}

#[pymethods]
impl PyIrisCode {
    #[new]
    fn new(bits: Vec<bool>, mask: Vec<bool>) -> PyResult<Self> {
        Ok(PyIrisCode {
            inner: iris::IrisCode::from_parts(bits, mask).map_err(err)?,
        })
    }

    #[getter]
    fn bits(&self) -> Vec<bool> {
        self.inner.bits.clone()
    }

    #[getter]
    fn mask(&self) -> Vec<bool> {
        self.inner.mask.clone()
    }

    fn usable(&self) -> bool {
        self.inner.usable()
    }
}

/// A trained super-resolution model loaded from a weight file.
#[pyclass(name = "Model", module = "irissr_py")]
pub struct PyModel {
    inner: TrainedModel,
}

#[pymethods]
impl PyModel {
    /// Loads a weight file; `factor` records the scale the weights were
    /// trained at (higher targets cascade the model).
    #[staticmethod]
    #[pyo3(signature = (path, factor = 2))]
    fn load(path: PathBuf, factor: u32) -> PyResult<Self> {
        Ok(PyModel {
            inner: harness::load_model(&path, factor).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(err)
    }

    #[getter]
    fn trained_factor(&self) -> u32 {
        self.inner.trained_factor()
    }

    /// Upscales `img` by `target_factor` with cascaded network passes.
    fn super_resolve(&self, img: &PyImage, target_factor: u32) -> PyResult<PyImage> {
        Ok(PyImage {
            inner: self
                .inner
                .super_resolve(&img.inner, target_factor)
                .map_err(err)?,
        })
    }
}

#[pyfunction]
#[pyo3(signature = (reference, test, peak = 1.0))]
fn psnr(reference: &PyImage, test: &PyImage, peak: f64) -> PyResult<f64> {
    metrics::psnr(&reference.inner, &test.inner, peak).map_err(err)
}

#[pyfunction]
fn ssim(reference: &PyImage, test: &PyImage) -> PyResult<f64> {
    metrics::ssim(&reference.inner, &test.inner).map_err(err)
}

#[pyfunction]
fn vif(reference: &PyImage, test: &PyImage) -> PyResult<f64> {
    metrics::vif(&reference.inner, &test.inner).map_err(err)
}

/// All three quality scores as a (psnr, ssim, vif) tuple.
#[pyfunction]
fn quality(reference: &PyImage, test: &PyImage) -> PyResult<(f64, f64, f64)> {
    let q = metrics::quality(&reference.inner, &test.inner).map_err(err)?;
    Ok((q.psnr, q.ssim, q.vif))
}

/// Rescales so the sclera radius hits `target_sclera_radius`, then crops
/// 231x231 around the pupil center. Returns None when the crop would leave
/// the frame (such images are discarded upstream).
#[pyfunction]
#[pyo3(signature = (img, annotation, target_sclera_radius = 105.0))]
fn preprocess(
    img: &PyImage,
    annotation: &PyAnnotation,
    target_sclera_radius: f64,
) -> PyResult<Option<(PyImage, PyAnnotation)>> {
    let pre = iris::preprocess(&img.inner, &annotation.inner, target_sclera_radius)
        .map_err(err)?;
    Ok(pre.map(|p| {
        (
            PyImage { inner: p.image },
            PyAnnotation {
                inner: p.annotation,
            },
        )
    }))
}

/// Unwraps the iris annulus into the normalized 240x20 strip.
#[pyfunction]
fn unwrap_iris(img: &PyImage, annotation: &PyAnnotation) -> PyResult<PyNormalizedIris> {
    Ok(PyNormalizedIris {
        inner: iris::unwrap(&img.inner, &annotation.inner).map_err(err)?,
    })
}

/// Encodes a normalized strip into a binary iris code via 1-D log-Gabor
/// phase quantization.
#[pyfunction]
#[pyo3(signature = (norm, wavelength = 18.0, sigma_over_f = 0.5, magnitude_floor = 1e-4))]
fn encode(
    norm: &PyNormalizedIris,
    wavelength: f64,
    sigma_over_f: f64,
    magnitude_floor: f64,
) -> PyResult<PyIrisCode> {
    let params = iris::LogGaborParams {
        wavelength,
        sigma_over_f,
        magnitude_floor,
    };
    Ok(PyIrisCode {
        inner: iris::log_gabor_encode(&norm.inner, &params).map_err(err)?,
    })
}

/// Normalized Hamming distance minimized over cyclic shifts in
/// [-max_shift, +max_shift].
#[pyfunction]
#[pyo3(signature = (a, b, max_shift = 8))]
fn hamming_distance(a: &PyIrisCode, b: &PyIrisCode, max_shift: usize) -> PyResult<f64> {
    iris::hamming_distance(&a.inner, &b.inner, max_shift).map_err(err)
}

/// Equal error rate of genuine/impostor distance scores; returns
/// (eer, threshold_at_eer).
#[pyfunction]
fn compute_eer(genuine: Vec<f64>, impostor: Vec<f64>) -> PyResult<(f64, f64)> {
    let r = iris::compute_eer(&genuine, &impostor).map_err(err)?;
    Ok((r.eer, r.threshold_at_eer))
}

/// Reconstructs a degraded copy of `hr` with the named method ("bilinear",
/// "bicubic", "srcnn-fs", "srcnn-tl", "srcnn-ft", or "sae"; learned methods
/// need `model`). Factor 1 is the no-degradation control.
#[pyfunction]
#[pyo3(signature = (hr, method, factor, model = None))]
fn reconstruct(
    hr: &PyImage,
    method: &str,
    factor: u32,
    model: Option<&PyModel>,
) -> PyResult<PyImage> {
    let method: Method = method.parse().map_err(err)?;
    Ok(PyImage {
        inner: harness::reconstruct(&hr.inner, method, factor, model.map(|m| &m.inner))
            .map_err(err)?,
    })
}

/// Renders one synthetic eye image plus its annotation. The texture is a
/// function of (seed, eye); the variant adds jitter, rotation, and noise.
#[pyfunction]
#[pyo3(signature = (eye = 0, variant = 0, width = 340, height = 320, seed = 0))]
fn synth_eye(
    eye: usize,
    variant: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> (PyImage, PyAnnotation) {
    let cfg = SynthConfig {
        eyes: eye + 1,
        images_per_eye: variant + 1,
        width,
        height,
        seed,
    };
    let (img, annotation) = harness::synth_eye(&cfg, eye, variant);
    (
        PyImage { inner: img },
        PyAnnotation { inner: annotation },
    )
}

/// Writes a synthetic corpus (eyeNN/img_V.png plus annotations.csv) under
/// `root`; returns the number of images written.
#[pyfunction]
#[pyo3(signature = (root, eyes = 6, images_per_eye = 3, width = 340, height = 320, seed = 0))]
fn generate_corpus(
    root: PathBuf,
    eyes: usize,
    images_per_eye: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> PyResult<usize> {
    let cfg = SynthConfig {
        eyes,
        images_per_eye,
        width,
        height,
        seed,
    };
    harness::generate_corpus(&root, &cfg).map_err(err)
}

#[pymodule]
fn irissr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyImage>()?;
    m.add_class::<PyAnnotation>()?;
    m.add_class::<PyNormalizedIris>()?;
    m.add_class::<PyIrisCode>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(vif, m)?)?;
    m.add_function(wrap_pyfunction!(quality, m)?)?;
    m.add_function(wrap_pyfunction!(preprocess, m)?)?;
    m.add_function(wrap_pyfunction!(unwrap_iris, m)?)?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(hamming_distance, m)?)?;
    m.add_function(wrap_pyfunction!(compute_eer, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(synth_eye, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    Ok(())
}
