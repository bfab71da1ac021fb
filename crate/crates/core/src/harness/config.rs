//! Experiment configuration: a TOML file (or defaults) naming methods,
//! factors, scenarios, split policy, and every training/matching
//! hyperparameter.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::harness::{Method, SplitSpec, DEFAULT_TRAIN_FRACTION};
use crate::iris::LogGaborParams;
use crate::srcnn;

/// Top-level experiment settings. Every field has a default, so an empty
/// TOML document is a valid config.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    /// Evaluation factors; 1 is the no-degradation control.
    pub factors: Vec<u32>,
    /// Verification scenarios (1 and/or 2).
    pub scenarios: Vec<u8>,
    pub seed: u64,
    /// Factor the learned models are trained at; higher evaluation factors
    /// cascade the model.
    pub train_factor: u32,
    /// Also score unwrapped-strip variants of the quality metrics.
    pub include_strips: bool,
    pub split: SplitSettings,
    pub srcnn: SrcnnSettings,
    pub sae: SaeSettings,
    pub iris: IrisSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: vec![Method::Bilinear, Method::Bicubic],
            factors: vec![2, 4, 8, 16],
            scenarios: vec![1, 2],
            seed: 0,
            train_factor: 2,
            include_strips: true,
            split: SplitSettings::default(),
            srcnn: SrcnnSettings::default(),
            sae: SaeSettings::default(),
            iris: IrisSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.factors.is_empty() {
            return Err(Error::Config("at least one factor is required".into()));
        }
        for &f in &self.factors {
            if ![1, 2, 4, 8, 16].contains(&f) {
                return Err(Error::Config(format!(
                    "factor {} is not one of 1, 2, 4, 8, 16",
                    f
                )));
            }
        }
        for &s in &self.scenarios {
            if !(1..=2).contains(&s) {
                return Err(Error::Config(format!("scenario {} is not 1 or 2", s)));
            }
        }
        if ![2, 4, 8, 16].contains(&self.train_factor) {
            return Err(Error::Config(format!(
                "train factor {} is not one of 2, 4, 8, 16",
                self.train_factor
            )));
        }
        if !(1..=srcnn::TARGET_SIZE).contains(&self.sae.inference_stride) {
            return Err(Error::Config(format!(
                "sae inference stride must be in 1..={}",
                srcnn::TARGET_SIZE
            )));
        }
        self.split.to_spec()?;
        Ok(())
    }
}

/// Split policy section; at most one of `fraction` and the named lists.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    pub fraction: Option<f64>,
    pub train_users: Option<Vec<String>>,
    pub test_users: Option<Vec<String>>,
}

impl SplitSettings {
    pub fn to_spec(&self) -> Result<SplitSpec> {
        match (&self.fraction, &self.train_users, &self.test_users) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => Err(Error::Config(
                "give either a split fraction or named user lists, not both".into(),
            )),
            (None, Some(train), Some(test)) => Ok(SplitSpec::Named {
                train: train.clone(),
                test: test.clone(),
            }),
            (None, Some(_), None) | (None, None, Some(_)) => Err(Error::Config(
                "named splits need both train_users and test_users".into(),
            )),
            (Some(f), None, None) => Ok(SplitSpec::Fraction(*f)),
            (None, None, None) => Ok(SplitSpec::Fraction(DEFAULT_TRAIN_FRACTION)),
        }
    }
}

/// SRCNN training hyperparameters.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SrcnnSettings {
    pub iterations: usize,
    pub learning_rate: f64,
    /// The reconstruction layer traditionally learns slower.
    pub layer3_learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub init_std: f64,
    /// Grid stride for cutting training patches.
    pub patch_stride: usize,
    /// Base weights for the transfer and fine-tune regimes.
    pub base_weights: Option<PathBuf>,
}

impl Default for SrcnnSettings {
    fn default() -> Self {
        SrcnnSettings {
            iterations: 10_000,
            learning_rate: 1e-4,
            layer3_learning_rate: 1e-5,
            momentum: 0.9,
            batch_size: 16,
            init_std: srcnn::DEFAULT_INIT_STD,
            patch_stride: 14,
            base_weights: None,
        }
    }
}

/// Stacked auto-encoder training hyperparameters.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaeSettings {
    /// Epoch budget of each greedy pretraining stage; 0 skips pretraining
    /// (random stage initialization).
    pub pretrain_epochs: usize,
    /// Fine-tuning epoch budget.
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub momentum: f64,
    pub min_rel_improvement: f64,
    pub patch_stride: usize,
    /// Cap on training vectors (shuffled, then truncated).
    pub max_train_vectors: usize,
    /// Patch-grid step of full-image reconstruction; finer is better and
    /// slower.
    pub inference_stride: usize,
}

impl Default for SaeSettings {
    fn default() -> Self {
        SaeSettings {
            pretrain_epochs: 30,
            epochs: 150,
            learning_rate: 0.2,
            batch_size: 1,
            momentum: 0.0,
            min_rel_improvement: 1e-4,
            patch_stride: 21,
            max_train_vectors: 1000,
            inference_stride: crate::sae::SAE_INFERENCE_STRIDE,
        }
    }
}

/// Iris pipeline settings shared by quality (strips) and recognition runs.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IrisSettings {
    pub target_sclera_radius: f64,
    pub wavelength: f64,
    pub sigma_over_f: f64,
    pub magnitude_floor: f64,
    pub max_shift: usize,
}

impl Default for IrisSettings {
    fn default() -> Self {
        let lg = LogGaborParams::default();
        IrisSettings {
            target_sclera_radius: crate::iris::DEFAULT_TARGET_SCLERA_RADIUS,
            wavelength: lg.wavelength,
            sigma_over_f: lg.sigma_over_f,
            magnitude_floor: lg.magnitude_floor,
            max_shift: 8,
        }
    }
}

impl IrisSettings {
    pub fn log_gabor(&self) -> LogGaborParams {
        LogGaborParams {
            wavelength: self.wavelength,
            sigma_over_f: self.sigma_over_f,
            magnitude_floor: self.magnitude_floor,
        }
    }
}
