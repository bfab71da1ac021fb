//! Patch training-set construction and the FS / TL / FT training regimes.

use std::path::PathBuf;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{degrade, Image, PatchSet};
use crate::nn::{load_weights_file, mse_loss, SgdConfig, SgdState, Tensor};
use crate::srcnn::{Provenance, SrcnnModel, BORDER, PATCH_SIZE, TARGET_SIZE};

/// One training example: a degraded 33×33 patch and the centered 21×21
/// crop of the corresponding high-resolution patch.
#[derive(Debug, Clone)]
pub struct TrainPair {
    pub input: Image,
    pub target: Image,
}

/// Training regimes: from scratch, transfer (use base weights unchanged,
/// no training), fine-tune (continue training from base weights).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    FromScratch,
    Transfer,
    FineTune,
}

/// Full training configuration for one run.
#[derive(Debug, Clone)]
pub struct TrainRegime {
    pub mode: TrainMode,
    /// Weight file to start from; required for TL/FT, forbidden for FS.
    pub base_weights: Option<PathBuf>,
    pub factor: u32,
    pub sgd: SgdConfig,
    /// The reconstruction layer traditionally trains slower than the
    /// feature layers; layers 1–2 use `sgd.learning_rate`.
    pub layer3_learning_rate: f64,
    /// Loss-history granularity in iterations.
    pub log_interval: usize,
    pub seed: u64,
}

impl TrainRegime {
    pub fn from_scratch(factor: u32) -> Self {
        TrainRegime {
            mode: TrainMode::FromScratch,
            base_weights: None,
            factor,
            sgd: SgdConfig {
                learning_rate: 1e-4,
                momentum: 0.9,
                batch_size: 16,
                iterations: 10_000,
            },
            layer3_learning_rate: 1e-5,
            log_interval: 100,
            seed: 0,
        }
    }

    pub fn transfer(factor: u32, base_weights: PathBuf) -> Self {
        TrainRegime {
            mode: TrainMode::Transfer,
            base_weights: Some(base_weights),
            ..Self::from_scratch(factor)
        }
    }

    pub fn fine_tune(factor: u32, base_weights: PathBuf) -> Self {
        TrainRegime {
            mode: TrainMode::FineTune,
            base_weights: Some(base_weights),
            ..Self::from_scratch(factor)
        }
    }
}

/// One loss-history row: mean mini-batch MSE at a given iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSample {
    pub iteration: usize,
    pub mean_mse: f64,
}

/// Builds co-anchored training pairs: each image is degraded as a whole
/// (bicubic down by `factor`, bicubic back up), then 33×33 patches are
/// taken from the degraded image on a `patch_stride` grid and paired with
/// the centered 21×21 crops of the HR patches at the same anchors. Images
/// too small for the patch grid or the factor are skipped with a warning.
pub fn make_training_set(
    hr_images: &[Image],
    factor: u32,
    patch_stride: usize,
) -> Result<Vec<TrainPair>> {
    if patch_stride == 0 {
        return Err(Error::invalid("patch stride must be nonzero"));
    }
    let mut pairs = Vec::new();
    for (idx, hr) in hr_images.iter().enumerate() {
        if hr.width() < PATCH_SIZE || hr.height() < PATCH_SIZE {
            log::warn!(
                "skipping image {}: {}x{} smaller than {}x{} patch",
                idx,
                hr.width(),
                hr.height(),
                PATCH_SIZE,
                PATCH_SIZE
            );
            continue;
        }
        let degraded = match degrade(hr, factor) {
            Ok(d) => d,
            Err(e) => {
                log::warn!("skipping image {}: {}", idx, e);
                continue;
            }
        };
        let inputs = PatchSet::extract(&degraded, PATCH_SIZE, patch_stride)?;
        let margin = BORDER / 2;
        for p in inputs.iter() {
            let target = hr.crop(p.row + margin, p.col + margin, TARGET_SIZE, TARGET_SIZE)?;
            pairs.push(TrainPair {
                input: p.image.clone(),
                target,
            });
        }
    }
    Ok(pairs)
}

/// Trains (or loads) a model according to the regime.
///
/// - FS: trains `model` from its current (random) initialization.
/// - TL: ignores `model`'s weights entirely; returns the base weights
///   unchanged with an empty loss history.
/// - FT: loads the base weights and continues training on `pairs`;
///   0 iterations degenerates to TL behavior (except provenance).
pub fn train(
    model: SrcnnModel<f32>,
    pairs: &[TrainPair],
    regime: &TrainRegime,
) -> Result<(SrcnnModel<f32>, Vec<LossSample>)> {
    let mut model = match regime.mode {
        TrainMode::FromScratch => {
            if regime.base_weights.is_some() {
                return Err(Error::invalid(
                    "from-scratch training does not take base weights",
                ));
            }
            let mut m = model;
            m.provenance = Provenance::Scratch;
            m
        }
        TrainMode::Transfer | TrainMode::FineTune => {
            let path = regime.base_weights.as_ref().ok_or_else(|| {
                Error::MissingWeights("transfer/fine-tune regimes need a base weight file".into())
            })?;
            let records = load_weights_file(path).map_err(|e| match e {
                Error::Io(io) => Error::MissingWeights(format!(
                    "cannot read base weights {}: {}",
                    path.display(),
                    io
                )),
                other => other,
            })?;
            let provenance = if regime.mode == TrainMode::Transfer {
                Provenance::Transfer
            } else {
                Provenance::FineTuned
            };
            SrcnnModel::from_records(&records, regime.factor, provenance)?
        }
    };
    model.trained_factor = regime.factor;

    if regime.mode == TrainMode::Transfer {
        return Ok((model, Vec::new()));
    }
    if regime.sgd.iterations == 0 {
        // Degenerate fine-tune: nothing to do.
        return Ok((model, Vec::new()));
    }
    regime.sgd.validate()?;
    if pairs.is_empty() {
        return Err(Error::invalid("training needs at least one pair"));
    }
    for p in pairs {
        if p.input.width() != PATCH_SIZE
            || p.input.height() != PATCH_SIZE
            || p.target.width() != TARGET_SIZE
            || p.target.height() != TARGET_SIZE
        {
            return Err(Error::invalid("training pairs must be 33x33 -> 21x21"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(regime.seed);
    let inputs: Vec<Tensor<f32>> = pairs.iter().map(|p| Tensor::from_image(&p.input)).collect();
    let targets: Vec<Tensor<f32>> = pairs.iter().map(|p| Tensor::from_image(&p.target)).collect();

    let mut states = [
        SgdState::new(model.layer1.weights.len()),
        SgdState::new(model.layer1.bias.len()),
        SgdState::new(model.layer2.weights.len()),
        SgdState::new(model.layer2.bias.len()),
        SgdState::new(model.layer3.weights.len()),
        SgdState::new(model.layer3.bias.len()),
    ];
    let mut history = Vec::new();
    let log_every = regime.log_interval.max(1);
    let batch = regime.sgd.batch_size;
    let inv_batch = 1.0 / batch as f32;

    for iteration in 0..regime.sgd.iterations {
        let mut acc: Option<crate::srcnn::SrcnnGrads<f32>> = None;
        let mut batch_mse = 0.0f64;
        for _ in 0..batch {
            let i = rng.random_range(0..pairs.len());
            let cache = model.forward_cached(&inputs[i])?;
            let (mse, dout) = mse_loss(cache.output.data(), targets[i].data())?;
            batch_mse += mse;
            let grad_out = Tensor::from_data(
                cache.output.height(),
                cache.output.width(),
                cache.output.channels(),
                dout,
            )?;
            let g = model.backward(&inputs[i], &cache, &grad_out)?;
            match &mut acc {
                None => acc = Some(g),
                Some(a) => {
                    for (dst, src) in [
                        (&mut a.layer1, &g.layer1),
                        (&mut a.layer2, &g.layer2),
                        (&mut a.layer3, &g.layer3),
                    ] {
                        for (d, s) in dst.weights.iter_mut().zip(&src.weights) {
                            *d += s;
                        }
                        for (d, s) in dst.bias.iter_mut().zip(&src.bias) {
                            *d += s;
                        }
                    }
                }
            }
        }
        let mut g = acc.expect("batch size is positive");
        for grads in [&mut g.layer1, &mut g.layer2, &mut g.layer3] {
            for v in &mut grads.weights {
                *v *= inv_batch;
            }
            for v in &mut grads.bias {
                *v *= inv_batch;
            }
        }
        let lr12 = regime.sgd.learning_rate;
        let lr3 = regime.layer3_learning_rate;
        let m = regime.sgd.momentum;
        states[0].step(&mut model.layer1.weights, &g.layer1.weights, lr12, m)?;
        states[1].step(&mut model.layer1.bias, &g.layer1.bias, lr12, m)?;
        states[2].step(&mut model.layer2.weights, &g.layer2.weights, lr12, m)?;
        states[3].step(&mut model.layer2.bias, &g.layer2.bias, lr12, m)?;
        states[4].step(&mut model.layer3.weights, &g.layer3.weights, lr3, m)?;
        states[5].step(&mut model.layer3.bias, &g.layer3.bias, lr3, m)?;

        if iteration % log_every == 0 || iteration + 1 == regime.sgd.iterations {
            history.push(LossSample {
                iteration,
                mean_mse: batch_mse / batch as f64,
            });
        }
    }
    Ok((model, history))
}
