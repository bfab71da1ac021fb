//! Three-layer super-resolution CNN: 9×9×1→64, 1×1×64→32, 5×5×32→1, all
//! stride 1 / padding 0, ReLU after the first two layers, linear output.
//! A 33×33 patch maps to a 21×21 reconstruction (12 pixels lost).

mod train;

pub use train::{make_training_set, train, LossSample, TrainMode, TrainPair, TrainRegime};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::image::{resize, Image, ResampleKernel};
use crate::nn::{
    grad_check, mse_loss, Activation, ConvGrads, ConvLayer, GradCheckReport, GradCheckable,
    LayerRecord, Real, Tensor,
};

/// How the current weights were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Scratch,
    Transfer,
    FineTuned,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Provenance::Scratch => "scratch",
            Provenance::Transfer => "transfer",
            Provenance::FineTuned => "fine-tuned",
        })
    }
}

/// Gaussian weight standard deviation used by [`SrcnnModel::build_default`].
pub const DEFAULT_INIT_STD: f64 = 0.001;

/// Spatial extent lost by the valid-convolution chain (9−1 + 1−1 + 5−1).
pub const BORDER: usize = 12;

/// Patch geometry: inputs are 33×33, reconstructions 21×21.
pub const PATCH_SIZE: usize = 33;
pub const TARGET_SIZE: usize = PATCH_SIZE - BORDER;

fn validate_factor(factor: u32) -> Result<()> {
    if !matches!(factor, 2 | 4 | 8 | 16) {
        return Err(Error::invalid(format!(
            "super-resolution factor must be 2, 4, 8, or 16, got {}",
            factor
        )));
    }
    Ok(())
}

/// The fixed three-layer architecture plus its training lineage.
#[derive(Debug, Clone)]
pub struct SrcnnModel<T> {
    pub layer1: ConvLayer<T>,
    pub layer2: ConvLayer<T>,
    pub layer3: ConvLayer<T>,
    pub trained_factor: u32,
    pub provenance: Provenance,
}

/// Forward-pass intermediates cached for backpropagation.
pub struct SrcnnForward<T> {
    pub z1: Tensor<T>,
    pub a1: Tensor<T>,
    pub z2: Tensor<T>,
    pub a2: Tensor<T>,
    pub output: Tensor<T>,
}

/// Parameter gradients for all three layers.
pub struct SrcnnGrads<T> {
    pub layer1: ConvGrads<T>,
    pub layer2: ConvGrads<T>,
    pub layer3: ConvGrads<T>,
}

impl SrcnnModel<f32> {
    /// Randomly initialized model: zero-mean Gaussian weights with standard
    /// deviation [`DEFAULT_INIT_STD`], zero biases. The same seed always
    /// produces the same weights.
    pub fn build_default(factor: u32, seed: u64) -> Result<Self> {
        Self::build_with_init(factor, seed, DEFAULT_INIT_STD)
    }

    /// Like [`build_default`](Self::build_default) with a custom weight
    /// standard deviation (training at desk scale benefits from a larger
    /// one than the 0.001 used for long runs).
    pub fn build_with_init(factor: u32, seed: u64, init_std: f64) -> Result<Self> {
        validate_factor(factor)?;
        if !(init_std > 0.0) {
            return Err(Error::invalid("init std must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, init_std).map_err(|e| Error::invalid(e.to_string()))?;
        let mut init = |layer: &mut ConvLayer<f32>| {
            for w in &mut layer.weights {
                *w = normal.sample(&mut rng) as f32;
            }
        };
        let mut layer1 = ConvLayer::zeros(1, 64, 9, 1, 0)?;
        let mut layer2 = ConvLayer::zeros(64, 32, 1, 1, 0)?;
        let mut layer3 = ConvLayer::zeros(32, 1, 5, 1, 0)?;
        init(&mut layer1);
        init(&mut layer2);
        init(&mut layer3);
        Ok(SrcnnModel {
            layer1,
            layer2,
            layer3,
            trained_factor: factor,
            provenance: Provenance::Scratch,
        })
    }

    /// Reassembles a model from weight-file records (three conv layers with
    /// the architecture's exact shapes).
    pub fn from_records(
        records: &[LayerRecord],
        factor: u32,
        provenance: Provenance,
    ) -> Result<Self> {
        validate_factor(factor)?;
        let expect = [(1usize, 64usize, 9usize), (64, 32, 1), (32, 1, 5)];
        if records.len() != 3 {
            return Err(Error::CorruptWeights(format!(
                "expected 3 conv layers, found {}",
                records.len()
            )));
        }
        let mut layers = Vec::with_capacity(3);
        for (i, rec) in records.iter().enumerate() {
            match rec {
                LayerRecord::Conv(l) => {
                    let (ci, co, k) = expect[i];
                    if l.in_channels != ci
                        || l.out_channels != co
                        || l.kernel_size != k
                        || l.stride != 1
                        || l.padding != 0
                    {
                        return Err(Error::CorruptWeights(format!(
                            "layer {} has shape {}x{}x{} stride {} pad {}, expected {}x{}x{} stride 1 pad 0",
                            i + 1,
                            l.kernel_size,
                            l.in_channels,
                            l.out_channels,
                            l.stride,
                            l.padding,
                            k,
                            ci,
                            co
                        )));
                    }
                    layers.push(l.clone());
                }
                LayerRecord::Dense(_) => {
                    return Err(Error::CorruptWeights(format!(
                        "layer {} is dense, expected conv",
                        i + 1
                    )))
                }
            }
        }
        let layer3 = layers.pop().unwrap();
        let layer2 = layers.pop().unwrap();
        let layer1 = layers.pop().unwrap();
        Ok(SrcnnModel {
            layer1,
            layer2,
            layer3,
            trained_factor: factor,
            provenance,
        })
    }

    /// Serializes the three layers for the weight file.
    pub fn to_records(&self) -> Vec<LayerRecord> {
        vec![
            LayerRecord::Conv(self.layer1.clone()),
            LayerRecord::Conv(self.layer2.clone()),
            LayerRecord::Conv(self.layer3.clone()),
        ]
    }

    /// Copy of the model in `f64`, for gradient checking.
    pub fn to_f64(&self) -> SrcnnModel<f64> {
        let conv = |l: &ConvLayer<f32>| ConvLayer::<f64> {
            in_channels: l.in_channels,
            out_channels: l.out_channels,
            kernel_size: l.kernel_size,
            stride: l.stride,
            padding: l.padding,
            weights: l.weights.iter().map(|&w| w as f64).collect(),
            bias: l.bias.iter().map(|&b| b as f64).collect(),
        };
        SrcnnModel {
            layer1: conv(&self.layer1),
            layer2: conv(&self.layer2),
            layer3: conv(&self.layer3),
            trained_factor: self.trained_factor,
            provenance: self.provenance,
        }
    }
}

impl<T: Real> SrcnnModel<T> {
    pub fn param_count(&self) -> usize {
        self.layer1.param_count() + self.layer2.param_count() + self.layer3.param_count()
    }

    /// Forward pass with cached intermediates. Input must be single-channel
    /// and at least 13×13; output extent shrinks by [`BORDER`].
    pub fn forward_cached(&self, input: &Tensor<T>) -> Result<SrcnnForward<T>> {
        let z1 = self.layer1.forward(input)?;
        let mut a1 = z1.clone();
        for v in a1.data_mut() {
            *v = Activation::Relu.apply(*v);
        }
        let z2 = self.layer2.forward(&a1)?;
        let mut a2 = z2.clone();
        for v in a2.data_mut() {
            *v = Activation::Relu.apply(*v);
        }
        let output = self.layer3.forward(&a2)?;
        Ok(SrcnnForward {
            z1,
            a1,
            z2,
            a2,
            output,
        })
    }

    /// Plain forward pass.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_cached(input)?.output)
    }

    /// Forward pass on an image patch; a 33×33 input yields 21×21.
    pub fn forward_patch(&self, patch: &Image) -> Result<Image> {
        self.forward(&Tensor::from_image(patch))?.into_image()
    }

    /// Backpropagates `grad_output` (loss gradient at the network output)
    /// through the cached forward pass.
    pub fn backward(
        &self,
        input: &Tensor<T>,
        cache: &SrcnnForward<T>,
        grad_output: &Tensor<T>,
    ) -> Result<SrcnnGrads<T>> {
        let (g3, mut da2) = self.layer3.backward(&cache.a2, grad_output)?;
        for (g, &z) in da2.data_mut().iter_mut().zip(cache.z2.data()) {
            *g *= Activation::Relu.derivative(z);
        }
        let (g2, mut da1) = self.layer2.backward(&cache.a1, &da2)?;
        for (g, &z) in da1.data_mut().iter_mut().zip(cache.z1.data()) {
            *g *= Activation::Relu.derivative(z);
        }
        let (g1, _) = self.layer1.backward(input, &da1)?;
        Ok(SrcnnGrads {
            layer1: g1,
            layer2: g2,
            layer3: g3,
        })
    }

    /// Applies the network to a whole image: reflect-pad by 6 so the output
    /// matches the input size. No clamping (callers decide).
    pub fn apply_full(&self, img: &Image) -> Result<Image> {
        let padded = img.pad_reflect(BORDER / 2)?;
        self.forward(&Tensor::from_image(&padded))?.into_image()
    }

    /// Cascaded super-resolution: repeats (bicubic upscale by the trained
    /// factor, full-image network pass, clamp) until `target_factor` is
    /// reached. The pass count `log(target)/log(trained)` must be integral.
    pub fn super_resolve(&self, img: &Image, target_factor: u32) -> Result<Image> {
        Ok(self.super_resolve_counted(img, target_factor)?.0)
    }

    /// [`super_resolve`](Self::super_resolve) plus the number of network
    /// passes actually performed.
    pub fn super_resolve_counted(&self, img: &Image, target_factor: u32) -> Result<(Image, u32)> {
        validate_factor(self.trained_factor)?;
        validate_factor(target_factor)?;
        let passes = cascade_passes(self.trained_factor, target_factor)?;
        let mut current = img.clone();
        for _ in 0..passes {
            let up = resize(
                &current,
                current.width() * self.trained_factor as usize,
                current.height() * self.trained_factor as usize,
                ResampleKernel::Bicubic,
            )?;
            let mut out = self.apply_full(&up)?;
            out.clamp_unit();
            current = out;
        }
        Ok((current, passes))
    }
}

/// Number of network applications needed to reach `target` with a model
/// trained at `trained`: log(target)/log(trained), which must be integral
/// (e.g. a factor-2 model reaches 8 in exactly 3 passes).
pub fn cascade_passes(trained: u32, target: u32) -> Result<u32> {
    validate_factor(trained)?;
    validate_factor(target)?;
    if target < trained {
        return Err(Error::invalid(format!(
            "target factor {} below trained factor {}",
            target, trained
        )));
    }
    let (t, n) = (trained.trailing_zeros(), target.trailing_zeros());
    if n % t != 0 {
        return Err(Error::invalid(format!(
            "factor {} is not a power of the trained factor {}",
            target, trained
        )));
    }
    Ok(n / t)
}

impl GradCheckable for SrcnnModel<f64> {
    type Input = Image;
    type Target = Image;

    fn flat_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in [&self.layer1, &self.layer2, &self.layer3] {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.bias);
        }
        p
    }

    fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::invalid("flat parameter length mismatch"));
        }
        let mut off = 0;
        for l in [&mut self.layer1, &mut self.layer2, &mut self.layer3] {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    fn loss_on(&self, input: &Image, target: &Image) -> Result<f64> {
        let out = self.forward(&Tensor::from_image(input))?;
        let t: Tensor<f64> = Tensor::from_image(target);
        Ok(mse_loss(out.data(), t.data())?.0)
    }

    fn analytic_grads(&self, input: &Image, target: &Image) -> Result<Vec<f64>> {
        let x = Tensor::from_image(input);
        let cache = self.forward_cached(&x)?;
        let t: Tensor<f64> = Tensor::from_image(target);
        let (_, dout) = mse_loss(cache.output.data(), t.data())?;
        let grad_out = Tensor::from_data(
            cache.output.height(),
            cache.output.width(),
            cache.output.channels(),
            dout,
        )?;
        let grads = self.backward(&x, &cache, &grad_out)?;
        let mut flat = Vec::with_capacity(self.param_count());
        for g in [&grads.layer1, &grads.layer2, &grads.layer3] {
            flat.extend_from_slice(&g.weights);
            flat.extend_from_slice(&g.bias);
        }
        Ok(flat)
    }
}

/// Finite-difference check of the full model on one input/target pair.
pub fn srcnn_grad_check(
    model: &SrcnnModel<f32>,
    input: &Image,
    target: &Image,
    eps: f64,
    max_samples: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut m64 = model.to_f64();
    grad_check(&mut m64, input, target, eps, max_samples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_image(w: usize, h: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_vec(w, h, (0..w * h).map(|_| rng.random()).collect()).unwrap()
    }

    #[test]
    fn parameter_count_is_8129() {
        let m = SrcnnModel::build_default(2, 0).unwrap();
        // (9·9·1·64 + 64) + (1·1·64·32 + 32) + (5·5·32·1 + 1)
        assert_eq!(m.param_count(), 5248 + 2080 + 801);
        assert_eq!(m.param_count(), 8129);
    }

    #[test]
    fn patch_forward_is_33_to_21() {
        let m = SrcnnModel::build_default(2, 1).unwrap();
        let out = m.forward_patch(&random_image(33, 33, 2)).unwrap();
        assert_eq!((out.width(), out.height()), (21, 21));
    }

    #[test]
    fn forward_shrinks_any_input_by_border() {
        let m = SrcnnModel::build_default(2, 3).unwrap();
        for (w, h) in [(13, 13), (40, 33), (64, 50)] {
            let out = m.forward_patch(&random_image(w, h, 4)).unwrap();
            assert_eq!((out.width(), out.height()), (w - BORDER, h - BORDER));
        }
    }

    #[test]
    fn same_seed_same_weights() {
        let a = SrcnnModel::build_default(2, 42).unwrap();
        let b = SrcnnModel::build_default(2, 42).unwrap();
        assert_eq!(a.layer1.weights, b.layer1.weights);
        assert_eq!(a.layer3.weights, b.layer3.weights);
        let c = SrcnnModel::build_default(2, 43).unwrap();
        assert_ne!(a.layer1.weights, c.layer1.weights);
    }

    #[test]
    fn invalid_factor_rejected() {
        assert!(SrcnnModel::build_default(3, 0).is_err());
        assert!(SrcnnModel::build_default(32, 0).is_err());
        assert!(SrcnnModel::build_default(1, 0).is_err());
    }

    #[test]
    fn cascade_pass_arithmetic() {
        assert_eq!(cascade_passes(2, 2).unwrap(), 1);
        assert_eq!(cascade_passes(2, 8).unwrap(), 3);
        assert_eq!(cascade_passes(2, 16).unwrap(), 4);
        assert_eq!(cascade_passes(4, 16).unwrap(), 2);
        assert!(cascade_passes(4, 8).is_err()); // log2(8)/log2(4) = 1.5
        assert!(cascade_passes(4, 2).is_err());
    }

    #[test]
    fn super_resolve_counts_passes_and_scales_dims() {
        let m = SrcnnModel::build_default(2, 7).unwrap();
        let img = random_image(16, 12, 8);
        let (out, passes) = m.super_resolve_counted(&img, 8).unwrap();
        assert_eq!(passes, 3);
        assert_eq!((out.width(), out.height()), (128, 96));
        assert!(out.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn full_image_pass_keeps_dimensions() {
        let m = SrcnnModel::build_default(2, 9).unwrap();
        let img = random_image(40, 36, 10);
        let out = m.apply_full(&img).unwrap();
        assert_eq!((out.width(), out.height()), (40, 36));
    }

    #[test]
    fn central_pixel_equivalence() {
        // Full-image convolution equals the per-patch central-pixel
        // procedure on interior pixels.
        let m = SrcnnModel::build_with_init(2, 11, 0.05).unwrap();
        let img = random_image(48, 48, 12);
        let full = m.apply_full(&img).unwrap();
        let half = PATCH_SIZE / 2; // 16
        let mid = TARGET_SIZE / 2; // 10
        for &(r, c) in &[(16usize, 16usize), (20, 25), (31, 16), (24, 31)] {
            let patch = img.crop(r - half, c - half, PATCH_SIZE, PATCH_SIZE).unwrap();
            let out = m.forward_patch(&patch).unwrap();
            let diff = (out.get(mid, mid) - full.get(r, c)).abs();
            assert!(diff < 1e-5, "({}, {}): {}", r, c, diff);
        }
    }

    #[test]
    fn weight_records_roundtrip() {
        let m = SrcnnModel::build_with_init(4, 5, 0.05).unwrap();
        let recs = m.to_records();
        let back = SrcnnModel::from_records(&recs, 4, Provenance::Transfer).unwrap();
        assert_eq!(m.layer1.weights, back.layer1.weights);
        assert_eq!(m.layer2.bias, back.layer2.bias);
        assert_eq!(back.provenance, Provenance::Transfer);
    }

    #[test]
    fn from_records_rejects_wrong_shapes() {
        let m = SrcnnModel::build_default(2, 0).unwrap();
        let mut recs = m.to_records();
        recs.swap(0, 2);
        assert!(SrcnnModel::from_records(&recs, 2, Provenance::Transfer).is_err());
        let dense = LayerRecord::Dense(
            crate::nn::DenseLayer::zeros(4, 4, Activation::Linear).unwrap(),
        );
        assert!(
            SrcnnModel::from_records(&[dense.clone(), dense.clone(), dense], 2, Provenance::Transfer)
                .is_err()
        );
    }

    #[test]
    fn grad_check_on_small_sample() {
        // Hidden biases at 1.0 keep every preactivation well away from the
        // ReLU kink, which centered differences at ε=1e-4 would otherwise
        // straddle on unlucky parameters.
        let mut m = SrcnnModel::build_with_init(2, 21, 0.01).unwrap();
        m.layer1.bias.fill(1.0);
        m.layer2.bias.fill(1.0);
        let input = random_image(33, 33, 22);
        let target = random_image(21, 21, 23);
        let report = srcnn_grad_check(&m, &input, &target, 1e-4, 50, 0).unwrap();
        assert_eq!(report.checked, 50);
        assert!(report.max_rel_err <= 1e-3, "rel {}", report.max_rel_err);
    }
}
