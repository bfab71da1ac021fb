//! Model preparation, reconstruction-method dispatch, and the quality and
//! recognition experiment drivers.

use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::harness::{
    Corpus, ExperimentConfig, ExperimentReport, Method, ReportRow, Split,
};
use crate::image::{resize, Image, ResampleKernel};
use crate::iris::{
    preprocess, run_verification, Preprocessed, Scenario, VerificationConfig, VerificationSample,
};
use crate::metrics::{psnr, quality, ssim};
use crate::nn::{load_weights_file, save_weights_file, Activation, LayerRecord};
use crate::sae::{
    encode_dataset, pretrain_layer, stack_and_fine_tune, Autoencoder, SaeModel, SaeTrainConfig,
    SAE_DIMS,
};
use crate::srcnn::{make_training_set, train, Provenance, SrcnnModel, TrainRegime};

/// A trained model of either family, ready for cascaded inference.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Srcnn(SrcnnModel<f32>),
    /// The auto-encoder stack plus its full-image inference stride.
    Sae(SaeModel<f32>, usize),
}

impl TrainedModel {
    /// Factor the model was trained at; cascading covers higher targets.
    pub fn trained_factor(&self) -> u32 {
        match self {
            TrainedModel::Srcnn(m) => m.trained_factor,
            TrainedModel::Sae(m, _) => m.trained_factor,
        }
    }

    pub fn super_resolve(&self, img: &Image, target_factor: u32) -> Result<Image> {
        match self {
            TrainedModel::Srcnn(m) => m.super_resolve(img, target_factor),
            TrainedModel::Sae(m, stride) => m.super_resolve(img, target_factor, *stride),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let records = match self {
            TrainedModel::Srcnn(m) => m.to_records(),
            TrainedModel::Sae(m, _) => m.to_records(),
        };
        save_weights_file(&records, path)
    }
}

/// Loads a weight file, inferring the family from its layer kinds (conv
/// layers form the CNN, dense layers the auto-encoder stack). `factor` is
/// the factor the weights were trained at.
pub fn load_model(path: &Path, factor: u32) -> Result<TrainedModel> {
    let records = load_weights_file(path)?;
    match records.first() {
        Some(LayerRecord::Conv(_)) => Ok(TrainedModel::Srcnn(SrcnnModel::from_records(
            &records,
            factor,
            Provenance::Transfer,
        )?)),
        Some(LayerRecord::Dense(_)) => Ok(TrainedModel::Sae(
            SaeModel::from_records(&records, factor)?,
            crate::sae::SAE_INFERENCE_STRIDE,
        )),
        None => Err(Error::CorruptWeights("weight file has no layers".into())),
    }
}

/// Simulates a `factor`× acquisition of `hr` (bicubic downscale to floored
/// dimensions) and reconstructs it with the given method; factor 1 is the
/// no-degradation control. Learned methods cascade from the model's trained
/// factor; since floored low-res dimensions do not always multiply back
/// exactly, their result is nudged onto the original grid bicubically.
pub fn reconstruct(
    hr: &Image,
    method: Method,
    factor: u32,
    model: Option<&TrainedModel>,
) -> Result<Image> {
    if factor == 1 {
        return Ok(hr.clone());
    }
    let f = factor as usize;
    let (lw, lh) = (hr.width() / f, hr.height() / f);
    if lw == 0 || lh == 0 {
        return Err(Error::invalid(format!(
            "factor {} collapses {}x{} image",
            factor,
            hr.width(),
            hr.height()
        )));
    }
    let low = resize(hr, lw, lh, ResampleKernel::Bicubic)?;
    match method {
        Method::Bilinear => resize(&low, hr.width(), hr.height(), ResampleKernel::Bilinear),
        Method::Bicubic => resize(&low, hr.width(), hr.height(), ResampleKernel::Bicubic),
        _ => {
            let model = model.ok_or(Error::NotTrained)?;
            let sr = model.super_resolve(&low, factor)?;
            if sr.width() == hr.width() && sr.height() == hr.height() {
                Ok(sr)
            } else {
                resize(&sr, hr.width(), hr.height(), ResampleKernel::Bicubic)
            }
        }
    }
}

/// The preprocessed crops of one split; images whose crop leaves the frame
/// are skipped with a log message.
fn split_crops(corpus: &Corpus, config: &ExperimentConfig, split: Split) -> Result<Vec<Preprocessed>> {
    let mut crops = Vec::new();
    for entry in corpus.entries_in(split) {
        let img = entry.load()?;
        match preprocess(&img, &entry.annotation, config.iris.target_sclera_radius)? {
            Some(pre) => crops.push(pre),
            None => log::warn!("skipping {}: crop leaves the frame", entry.image_id),
        }
    }
    if crops.is_empty() {
        return Err(Error::Corpus(format!(
            "{:?} split has no usable images",
            split
        )));
    }
    Ok(crops)
}

/// Trains (or loads) the model a learned method needs; baselines yield
/// `None`. Training material is the train split's preprocessed crops.
pub fn prepare_model(
    corpus: &Corpus,
    method: Method,
    config: &ExperimentConfig,
) -> Result<Option<TrainedModel>> {
    if !method.is_learned() {
        return Ok(None);
    }
    if method == Method::SrcnnTl {
        // Transfer reuses foreign-domain weights untouched, so no training
        // material is needed.
        let path = config.srcnn.base_weights.as_deref().ok_or_else(|| {
            Error::MissingWeights("srcnn-tl requires srcnn.base_weights".into())
        })?;
        return Ok(Some(load_model(path, config.train_factor)?));
    }
    let crops: Vec<Image> = split_crops(corpus, config, Split::Train)?
        .into_iter()
        .map(|p| p.image)
        .collect();
    let model = match method {
        Method::SrcnnFs | Method::SrcnnFt => {
            TrainedModel::Srcnn(train_srcnn(&crops, method, config)?)
        }
        Method::Sae => TrainedModel::Sae(
            train_sae(&crops, config)?,
            config.sae.inference_stride,
        ),
        _ => unreachable!("baselines and transfer handled above"),
    };
    Ok(Some(model))
}

fn train_srcnn(
    crops: &[Image],
    method: Method,
    config: &ExperimentConfig,
) -> Result<SrcnnModel<f32>> {
    let s = &config.srcnn;
    let pairs = make_training_set(crops, config.train_factor, s.patch_stride)?;
    if pairs.is_empty() {
        return Err(Error::Corpus("no training patches could be cut".into()));
    }
    let mut regime = match method {
        Method::SrcnnFs => TrainRegime::from_scratch(config.train_factor),
        Method::SrcnnFt => {
            let path = s.base_weights.clone().ok_or_else(|| {
                Error::MissingWeights("srcnn-ft requires srcnn.base_weights".into())
            })?;
            TrainRegime::fine_tune(config.train_factor, path)
        }
        _ => unreachable!("not an SRCNN training method"),
    };
    regime.sgd.learning_rate = s.learning_rate;
    regime.sgd.momentum = s.momentum;
    regime.sgd.batch_size = s.batch_size;
    regime.sgd.iterations = s.iterations;
    regime.layer3_learning_rate = s.layer3_learning_rate;
    regime.seed = config.seed;
    let model = SrcnnModel::build_with_init(config.train_factor, config.seed, s.init_std)?;
    let (model, _history) = train(model, &pairs, &regime)?;
    Ok(model)
}

fn train_sae(crops: &[Image], config: &ExperimentConfig) -> Result<SaeModel<f32>> {
    let s = &config.sae;
    let pairs = make_training_set(crops, config.train_factor, s.patch_stride)?;
    let mut pairs: Vec<(Vec<f32>, Vec<f32>)> = pairs
        .iter()
        .map(|p| (p.input.data().to_vec(), p.target.data().to_vec()))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Corpus("no training vectors could be cut".into()));
    }
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    pairs.truncate(s.max_train_vectors);

    let stage_cfg = |epochs: usize, seed: u64| SaeTrainConfig {
        learning_rate: s.learning_rate,
        epochs,
        batch_size: s.batch_size,
        momentum: s.momentum,
        min_rel_improvement: s.min_rel_improvement,
        hidden_activation: Activation::Sigmoid,
        seed,
    };

    // Greedy pretraining up the dimension chain, each stage trained on the
    // previous stage's encodings; 0 epochs keeps a stage at its random
    // initialization.
    let mut stages: Vec<Autoencoder<f32>> = Vec::with_capacity(4);
    let mut data: Vec<Vec<f32>> = pairs.iter().map(|(x, _)| x.clone()).collect();
    for i in 0..4 {
        let (in_dim, hidden) = (SAE_DIMS[i], SAE_DIMS[i + 1]);
        let seed = config.seed.wrapping_add(1 + i as u64);
        let ae = if s.pretrain_epochs == 0 {
            Autoencoder::random(in_dim, hidden, Activation::Sigmoid, seed)?
        } else {
            pretrain_layer(&data, in_dim, hidden, &stage_cfg(s.pretrain_epochs, seed))?.0
        };
        data = encode_dataset(&ae, &data)?;
        stages.push(ae);
    }

    let (mut model, _history) =
        stack_and_fine_tune(&stages, &pairs, &stage_cfg(s.epochs, config.seed))?;
    model.trained_factor = config.train_factor;
    Ok(model)
}

fn push_mean(
    report: &mut ExperimentReport,
    method: Method,
    train_factor: Option<u32>,
    eval_factor: u32,
    metric: &str,
    sum: Option<f64>,
    n: usize,
) -> Result<()> {
    report.push(ReportRow {
        method,
        train_factor,
        eval_factor,
        metric_or_scenario: metric.into(),
        value: sum.map(|s| s / n as f64),
    })
}

/// Quality experiment: for every method and factor, degrade each test
/// crop, reconstruct it, and average PSNR/SSIM/VIF against the original —
/// plus unwrapped-strip variants when configured. Learned methods are
/// trained once at `train_factor` and cascaded to higher factors.
///
/// Strip VIF cells are reported without a value: the 20-row strip is below
/// the metric's minimum extent.
pub fn run_quality_experiment(
    corpus: &Corpus,
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    config.validate()?;
    let tests = split_crops(corpus, config, Split::Test)?;
    let n = tests.len();
    let mut report = ExperimentReport::new();
    for &method in &config.methods {
        let model = prepare_model(corpus, method, config)?;
        let trained_at = model.as_ref().map(|m| m.trained_factor());
        for &factor in &config.factors {
            let (mut s_psnr, mut s_ssim, mut s_vif) = (0.0, 0.0, 0.0);
            let (mut s_psnr_strip, mut s_ssim_strip) = (0.0, 0.0);
            for pre in &tests {
                let sr = reconstruct(&pre.image, method, factor, model.as_ref())?;
                let q = quality(&pre.image, &sr)?;
                s_psnr += q.psnr;
                s_ssim += q.ssim;
                s_vif += q.vif;
                if config.include_strips {
                    let (p, s) = strip_scores(pre, &sr)?;
                    s_psnr_strip += p;
                    s_ssim_strip += s;
                }
            }
            let mut cell = |metric: &str, sum: Option<f64>| {
                push_mean(&mut report, method, trained_at, factor, metric, sum, n)
            };
            cell("psnr", Some(s_psnr))?;
            cell("ssim", Some(s_ssim))?;
            cell("vif", Some(s_vif))?;
            if config.include_strips {
                cell("psnr_strip", Some(s_psnr_strip))?;
                cell("ssim_strip", Some(s_ssim_strip))?;
                cell("vif_strip", None)?;
            }
        }
    }
    Ok(report)
}

/// PSNR and SSIM between the unwrapped strips of the original crop and its
/// reconstruction.
fn strip_scores(pre: &Preprocessed, sr: &Image) -> Result<(f64, f64)> {
    let hr_strip = crate::iris::unwrap(&pre.image, &pre.annotation)?.strip;
    let sr_strip = crate::iris::unwrap(sr, &pre.annotation)?.strip;
    Ok((
        psnr(&hr_strip, &sr_strip, 1.0)?,
        ssim(&hr_strip, &sr_strip)?,
    ))
}

/// Recognition experiment: the equal error rate per method, factor, and
/// scenario, matching over the test split.
pub fn run_recognition_experiment(
    corpus: &Corpus,
    config: &ExperimentConfig,
) -> Result<ExperimentReport> {
    config.validate()?;
    let mut samples = Vec::new();
    for entry in corpus.entries_in(Split::Test) {
        samples.push(VerificationSample {
            image_id: entry.image_id.clone(),
            eye_id: entry.eye_id.clone(),
            image: entry.load()?,
            annotation: entry.annotation,
        });
    }
    let mut report = ExperimentReport::new();
    for &method in &config.methods {
        let model = prepare_model(corpus, method, config)?;
        let trained_at = model.as_ref().map(|m| m.trained_factor());
        for &factor in &config.factors {
            for &scenario in &config.scenarios {
                let vconfig = VerificationConfig {
                    scenario: Scenario::from_number(scenario)?,
                    target_sclera_radius: config.iris.target_sclera_radius,
                    log_gabor: config.iris.log_gabor(),
                    max_shift: config.iris.max_shift,
                };
                let result = run_verification(&samples, &vconfig, |img| {
                    reconstruct(img, method, factor, model.as_ref())
                })?;
                report.push(ReportRow {
                    method,
                    train_factor: trained_at,
                    eval_factor: factor,
                    metric_or_scenario: format!("scenario{}", scenario),
                    value: Some(result.eer),
                })?;
            }
        }
    }
    Ok(report)
}
