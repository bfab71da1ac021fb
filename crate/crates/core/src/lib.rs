//! Single-image super-resolution for iris images, plus the quality metrics
//! and verification pipeline used to evaluate it.
//!
//! The crate is organized as:
//!
//! - [`image`]: grayscale image container, bilinear/bicubic resampling,
//!   patch extraction/assembly, PNG/PGM I/O;
//! - [`nn`]: a minimal neural-network engine (conv/dense layers, SGD with
//!   momentum, gradient checking, weight-file serialization);
//! - [`srcnn`]: a three-layer convolutional super-resolution network;
//! - [`sae`]: a stacked auto-encoder super-resolution network with greedy
//!   layer-wise pretraining;
//! - [`metrics`]: PSNR, SSIM, and pixel-domain VIF;
//! - [`iris`]: segmentation-driven preprocessing, rubber-sheet unwrapping,
//!   log-Gabor binary codes, Hamming-distance matching, and EER computation;
//! - [`harness`]: corpus handling, experiment drivers, report generation,
//!   and synthetic data for self-contained runs.

pub mod error;
pub mod harness;
pub mod image;
pub mod iris;
pub mod metrics;
pub mod nn;
pub mod sae;
pub mod srcnn;

pub use error::{Error, Result};
