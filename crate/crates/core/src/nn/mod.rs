//! Minimal neural-network engine: conv/dense layers, activations, MSE loss,
//! SGD with momentum, gradient checking, and weight-file serialization.
//!
//! Everything is generic over [`Real`] so the same code runs in `f32` for
//! training/inference and in `f64` for finite-difference gradient checks
//! (centered differences at ε=1e-4 are noise-dominated in single precision).

mod conv;
mod dense;
mod gradcheck;
mod sgd;
mod weights;

pub use conv::{ConvGrads, ConvLayer};
pub use dense::{DenseGrads, DenseLayer};
pub use gradcheck::{grad_check, GradCheckReport, GradCheckable};
pub use sgd::{SgdConfig, SgdState};
pub use weights::{read_weights, write_weights, load_weights_file, save_weights_file, LayerRecord};

use crate::error::{Error, Result};

/// Floating-point scalar the engine is generic over.
pub trait Real:
    Copy
    + PartialOrd
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + std::ops::Neg<Output = Self>
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + 'static
{
    const ZERO: Self;
    const ONE: Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn exp(self) -> Self;
}

impl Real for f32 {
    const ZERO: f32 = 0.0;
    const ONE: f32 = 1.0;
    #[inline]
    fn from_f64(v: f64) -> f32 {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn exp(self) -> f32 {
        f32::exp(self)
    }
}

impl Real for f64 {
    const ZERO: f64 = 0.0;
    const ONE: f64 = 1.0;
    #[inline]
    fn from_f64(v: f64) -> f64 {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn exp(self) -> f64 {
        f64::exp(self)
    }
}

/// Dense height × width × channels tensor, stored row-major with channels
/// fastest (HWC). Flat vectors for dense layers are plain slices.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Tensor {
            height,
            width,
            channels,
            data: vec![T::ZERO; height * width * channels],
        }
    }

    pub fn from_data(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::invalid(format!(
                "tensor data length {} does not match {}x{}x{}",
                data.len(),
                height,
                width,
                channels
            )));
        }
        Ok(Tensor {
            height,
            width,
            channels,
            data,
        })
    }

    /// Single-channel tensor from a grayscale image.
    pub fn from_image(img: &crate::image::Image) -> Self {
        Tensor {
            height: img.height(),
            width: img.width(),
            channels: 1,
            data: img.data().iter().map(|&v| T::from_f64(v as f64)).collect(),
        }
    }

    /// Converts a single-channel tensor back to an image (no clamping).
    pub fn into_image(self) -> Result<crate::image::Image> {
        if self.channels != 1 {
            return Err(Error::invalid("only single-channel tensors map to images"));
        }
        crate::image::Image::from_vec(
            self.width,
            self.height,
            self.data.iter().map(|&v| v.to_f64() as f32).collect(),
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> T {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: T) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }
}

/// Elementwise nonlinearity. Derivatives are taken with respect to the
/// pre-activation input; the ReLU subgradient at 0 is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Linear => x,
            Activation::Relu => {
                if x > T::ZERO {
                    x
                } else {
                    T::ZERO
                }
            }
            Activation::Sigmoid => T::ONE / (T::ONE + (-x).exp()),
        }
    }

    #[inline]
    pub fn derivative<T: Real>(self, x: T) -> T {
        match self {
            Activation::Linear => T::ONE,
            Activation::Relu => {
                if x > T::ZERO {
                    T::ONE
                } else {
                    T::ZERO
                }
            }
            Activation::Sigmoid => {
                let s = self.apply(x);
                s * (T::ONE - s)
            }
        }
    }
}

/// Elementwise ReLU, `max(0, x)`.
pub fn relu<T: Real>(x: T) -> T {
    Activation::Relu.apply(x)
}

/// ReLU derivative; 0 at the kink.
pub fn relu_grad<T: Real>(x: T) -> T {
    Activation::Relu.derivative(x)
}

/// Mean squared error over all elements and its gradient w.r.t. `pred`,
/// `2(pred − target)/n`. The loss accumulates in `f64`.
pub fn mse_loss<T: Real>(pred: &[T], target: &[T]) -> Result<(f64, Vec<T>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::invalid(format!(
            "mse over mismatched lengths {} vs {}",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len();
    let inv_n = T::from_f64(1.0 / n as f64);
    let two = T::from_f64(2.0);
    let mut loss = 0.0f64;
    let mut grad = Vec::with_capacity(n);
    for (&p, &t) in pred.iter().zip(target.iter()) {
        let d = p - t;
        loss += d.to_f64() * d.to_f64();
        grad.push(two * d * inv_n);
    }
    Ok((loss / n as f64, grad))
}
