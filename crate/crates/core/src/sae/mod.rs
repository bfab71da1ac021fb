//! Stacked auto-encoder super-resolution: four greedily pretrained
//! encoders (1089→1000→2000→2600→2000) plus a 2000→441 output layer,
//! fine-tuned end to end. A vectorized 33×33 patch maps to a 21×21
//! reconstruction.

mod train;

pub use train::{encode_dataset, pretrain_layer, stack_and_fine_tune, SaeTrainConfig};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{resize, Image, Patch, PatchSet, ResampleKernel};
use crate::nn::{
    grad_check, mse_loss, Activation, DenseGrads, DenseLayer, GradCheckReport, GradCheckable,
    LayerRecord, Real,
};
use crate::srcnn::{cascade_passes, BORDER, PATCH_SIZE, TARGET_SIZE};

/// The fixed layer-size chain, input to output.
pub const SAE_DIMS: [usize; 6] = [1089, 1000, 2000, 2600, 2000, 441];

/// Default patch stride for inference (3× overlap per axis); stride 1
/// mirrors the CNN's dense central-pixel procedure at much higher cost.
pub const SAE_INFERENCE_STRIDE: usize = 7;

/// Encoder/decoder pair trained to reproduce its input.
#[derive(Debug, Clone)]
pub struct Autoencoder<T> {
    pub encoder: DenseLayer<T>,
    pub decoder: DenseLayer<T>,
    /// Whether this pair went through pretraining (as opposed to random
    /// initialization).
    pub pretrained: bool,
}

/// Uniform ±1/√in_dim initialization used for all dense layers here.
fn init_dense(
    rng: &mut ChaCha8Rng,
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
) -> Result<DenseLayer<f32>> {
    let mut layer = DenseLayer::zeros(in_dim, out_dim, activation)?;
    let bound = 1.0 / (in_dim as f64).sqrt();
    for w in &mut layer.weights {
        *w = rng.random_range(-bound..bound) as f32;
    }
    Ok(layer)
}

impl Autoencoder<f32> {
    /// Randomly initialized (not pretrained) pair; the hidden layer uses
    /// `hidden_activation`, the reconstruction side is linear.
    pub fn random(
        in_dim: usize,
        hidden_dim: usize,
        hidden_activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Autoencoder {
            encoder: init_dense(&mut rng, in_dim, hidden_dim, hidden_activation)?,
            decoder: init_dense(&mut rng, hidden_dim, in_dim, Activation::Linear)?,
            pretrained: false,
        })
    }

    /// Encoder → decoder round trip.
    pub fn reconstruct(&self, input: &[f32]) -> Result<Vec<f32>> {
        self.decoder.forward(&self.encoder.forward(input)?)
    }

    /// Mean reconstruction MSE over a dataset.
    pub fn reconstruction_mse(&self, data: &[Vec<f32>]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::invalid("empty dataset"));
        }
        let mut total = 0.0;
        for v in data {
            let r = self.reconstruct(v)?;
            total += mse_loss(&r, v)?.0;
        }
        Ok(total / data.len() as f64)
    }
}

/// The stacked network. `encoders[i]` maps `SAE_DIMS[i]` to
/// `SAE_DIMS[i+1]`; the output layer maps 2000 to 441.
#[derive(Debug, Clone)]
pub struct SaeModel<T> {
    pub encoders: Vec<DenseLayer<T>>,
    pub output_layer: DenseLayer<T>,
    pub pretrained: [bool; 4],
    pub trained: bool,
    pub trained_factor: u32,
}

/// Cached activations for backpropagation: `pre[i]`/`post[i]` are the
/// pre-/post-activation vectors of layer `i` (output layer last).
pub struct SaeForward<T> {
    pub pre: Vec<Vec<T>>,
    pub post: Vec<Vec<T>>,
}

/// Per-layer parameter gradients, same order as the forward chain.
pub struct SaeGrads<T> {
    pub layers: Vec<DenseGrads<T>>,
}

fn check_chain_dims(dims: &[usize]) -> Result<()> {
    if dims != SAE_DIMS {
        return Err(Error::invalid(format!(
            "auto-encoder chain must be {:?}, got {:?}",
            SAE_DIMS, dims
        )));
    }
    Ok(())
}

impl SaeModel<f32> {
    /// Assembles the stack from four pretrained auto-encoders (their
    /// decoders are discarded) plus a freshly initialized output layer.
    /// The dimension chain must be exactly [`SAE_DIMS`].
    pub fn from_autoencoders(autoencoders: &[Autoencoder<f32>], seed: u64) -> Result<Self> {
        if autoencoders.len() != 4 {
            return Err(Error::invalid(format!(
                "expected 4 auto-encoders, got {}",
                autoencoders.len()
            )));
        }
        let mut dims = vec![autoencoders[0].encoder.in_dim];
        for ae in autoencoders {
            if ae.encoder.in_dim != *dims.last().unwrap() {
                return Err(Error::invalid("auto-encoder dimensions do not chain"));
            }
            if ae.decoder.in_dim != ae.encoder.out_dim || ae.decoder.out_dim != ae.encoder.in_dim
            {
                return Err(Error::invalid("decoder does not mirror encoder"));
            }
            dims.push(ae.encoder.out_dim);
        }
        dims.push(TARGET_SIZE * TARGET_SIZE);
        check_chain_dims(&dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let output_layer = init_dense(&mut rng, SAE_DIMS[4], SAE_DIMS[5], Activation::Linear)?;
        Ok(SaeModel {
            encoders: autoencoders.iter().map(|ae| ae.encoder.clone()).collect(),
            output_layer,
            pretrained: [
                autoencoders[0].pretrained,
                autoencoders[1].pretrained,
                autoencoders[2].pretrained,
                autoencoders[3].pretrained,
            ],
            trained: false,
            trained_factor: 2,
        })
    }

    /// Reassembles a model from weight-file records (five dense layers with
    /// the exact dimension chain). Loaded models count as trained.
    pub fn from_records(records: &[LayerRecord], factor: u32) -> Result<Self> {
        if records.len() != 5 {
            return Err(Error::CorruptWeights(format!(
                "expected 5 dense layers, found {}",
                records.len()
            )));
        }
        let mut layers = Vec::with_capacity(5);
        let mut dims = Vec::with_capacity(6);
        for rec in records {
            match rec {
                LayerRecord::Dense(l) => {
                    if dims.is_empty() {
                        dims.push(l.in_dim);
                    } else if *dims.last().unwrap() != l.in_dim {
                        return Err(Error::CorruptWeights(
                            "dense layer dimensions do not chain".into(),
                        ));
                    }
                    dims.push(l.out_dim);
                    layers.push(l.clone());
                }
                LayerRecord::Conv(_) => {
                    return Err(Error::CorruptWeights("expected dense layer, found conv".into()))
                }
            }
        }
        check_chain_dims(&dims).map_err(|e| Error::CorruptWeights(e.to_string()))?;
        let output_layer = layers.pop().unwrap();
        Ok(SaeModel {
            encoders: layers,
            output_layer,
            pretrained: [true; 4],
            trained: true,
            trained_factor: factor,
        })
    }

    pub fn to_records(&self) -> Vec<LayerRecord> {
        let mut recs: Vec<LayerRecord> = self
            .encoders
            .iter()
            .map(|l| LayerRecord::Dense(l.clone()))
            .collect();
        recs.push(LayerRecord::Dense(self.output_layer.clone()));
        recs
    }

    /// Copy in `f64` for gradient checking.
    pub fn to_f64(&self) -> SaeModel<f64> {
        let conv = |l: &DenseLayer<f32>| DenseLayer::<f64> {
            in_dim: l.in_dim,
            out_dim: l.out_dim,
            weights: l.weights.iter().map(|&w| w as f64).collect(),
            bias: l.bias.iter().map(|&b| b as f64).collect(),
            activation: l.activation,
        };
        SaeModel {
            encoders: self.encoders.iter().map(conv).collect(),
            output_layer: conv(&self.output_layer),
            pretrained: self.pretrained,
            trained: self.trained,
            trained_factor: self.trained_factor,
        }
    }
}

impl<T: Real> SaeModel<T> {
    fn layers(&self) -> Vec<&DenseLayer<T>> {
        let mut v: Vec<&DenseLayer<T>> = self.encoders.iter().collect();
        v.push(&self.output_layer);
        v
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    /// Forward pass caching every layer's pre- and post-activation.
    pub fn forward_cached(&self, input: &[T]) -> Result<SaeForward<T>> {
        let mut pre = Vec::with_capacity(5);
        let mut post: Vec<Vec<T>> = Vec::with_capacity(5);
        for (i, layer) in self.layers().into_iter().enumerate() {
            let x = if i == 0 { input } else { &post[i - 1] };
            let z = layer.preactivation(x)?;
            let a = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(z);
            post.push(a);
        }
        Ok(SaeForward { pre, post })
    }

    /// Plain forward pass: 1089 in, 441 out.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        let mut cache = self.forward_cached(input)?;
        Ok(cache.post.pop().expect("forward chain is nonempty"))
    }

    /// Backpropagates the loss gradient at the output through the chain.
    pub fn backward(
        &self,
        input: &[T],
        cache: &SaeForward<T>,
        grad_output: &[T],
    ) -> Result<SaeGrads<T>> {
        let n = self.encoders.len() + 1;
        let mut grads: Vec<Option<DenseGrads<T>>> = (0..n).map(|_| None).collect();
        let mut upstream = grad_output.to_vec();
        for (i, layer) in self.layers().into_iter().enumerate().rev() {
            let x = if i == 0 { input } else { &cache.post[i - 1] };
            let (g, gin) = layer.backward(x, &cache.pre[i], &upstream)?;
            grads[i] = Some(g);
            upstream = gin;
        }
        Ok(SaeGrads {
            layers: grads.into_iter().map(|g| g.unwrap()).collect(),
        })
    }

    /// Vectorizes a 33×33 patch row-major, runs the network, reshapes the
    /// 441-vector to 21×21, and clamps to [0,1]. Refused until the model
    /// has been fine-tuned (or loaded from a weight file).
    pub fn reconstruct_patch(&self, patch: &Image) -> Result<Image> {
        if !self.trained {
            return Err(Error::NotTrained);
        }
        if patch.width() != PATCH_SIZE || patch.height() != PATCH_SIZE {
            return Err(Error::invalid(format!(
                "expected {0}x{0} patch, got {1}x{2}",
                PATCH_SIZE,
                patch.width(),
                patch.height()
            )));
        }
        let input: Vec<T> = patch.data().iter().map(|&v| T::from_f64(v as f64)).collect();
        let out = self.forward(&input)?;
        let mut img = Image::from_vec(
            TARGET_SIZE,
            TARGET_SIZE,
            out.iter().map(|&v| v.to_f64() as f32).collect(),
        )?;
        img.clamp_unit();
        Ok(img)
    }

    /// One full-image reconstruction pass: reflect-pad by 6, reconstruct
    /// 33×33 patches on a covering grid with the given stride, and average
    /// the 21×21 outputs back into an image of the input's size.
    pub fn apply_full(&self, img: &Image, stride: usize) -> Result<Image> {
        let padded = img.pad_reflect(BORDER / 2)?;
        let inputs = PatchSet::extract_covering(&padded, PATCH_SIZE, stride)?;
        let mut outputs = Vec::with_capacity(inputs.len());
        for p in inputs.iter() {
            // A padded-grid anchor (r, c) centers the 21×21 output on the
            // same (r, c) in original coordinates.
            outputs.push(Patch {
                row: p.row,
                col: p.col,
                image: self.reconstruct_patch(&p.image)?,
            });
        }
        PatchSet::from_patches(outputs)?.assemble(img.width(), img.height())
    }

    /// Cascaded super-resolution with the same contract as the CNN's:
    /// bicubic upscale by the trained factor then a full-image network
    /// pass, repeated until the target factor is reached.
    pub fn super_resolve(&self, img: &Image, target_factor: u32, stride: usize) -> Result<Image> {
        Ok(self.super_resolve_counted(img, target_factor, stride)?.0)
    }

    /// [`super_resolve`](Self::super_resolve) plus the pass count.
    pub fn super_resolve_counted(
        &self,
        img: &Image,
        target_factor: u32,
        stride: usize,
    ) -> Result<(Image, u32)> {
        if stride == 0 || stride > TARGET_SIZE {
            return Err(Error::invalid(format!(
                "inference stride must be in 1..={}",
                TARGET_SIZE
            )));
        }
        let passes = cascade_passes(self.trained_factor, target_factor)?;
        let mut current = img.clone();
        for _ in 0..passes {
            let up = resize(
                &current,
                current.width() * self.trained_factor as usize,
                current.height() * self.trained_factor as usize,
                ResampleKernel::Bicubic,
            )?;
            let mut out = self.apply_full(&up, stride)?;
            out.clamp_unit();
            current = out;
        }
        Ok((current, passes))
    }
}

impl GradCheckable for SaeModel<f64> {
    type Input = Vec<f64>;
    type Target = Vec<f64>;

    fn flat_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for l in self.layers() {
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
        for l in self
            .encoders
            .iter_mut()
            .chain(std::iter::once(&mut self.output_layer))
        {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    fn loss_on(&self, input: &Vec<f64>, target: &Vec<f64>) -> Result<f64> {
        Ok(mse_loss(&self.forward(input)?, target)?.0)
    }

    fn analytic_grads(&self, input: &Vec<f64>, target: &Vec<f64>) -> Result<Vec<f64>> {
        let cache = self.forward_cached(input)?;
        let (_, dout) = mse_loss(cache.post.last().unwrap(), target)?;
        let grads = self.backward(input, &cache, &dout)?;
        let mut flat = Vec::with_capacity(self.param_count());
        for g in &grads.layers {
            flat.extend_from_slice(&g.weights);
            flat.extend_from_slice(&g.bias);
        }
        Ok(flat)
    }
}

/// Finite-difference check of the full stack on one vector pair.
pub fn sae_grad_check(
    model: &SaeModel<f32>,
    input: &[f32],
    target: &[f32],
    eps: f64,
    max_samples: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut m64 = model.to_f64();
    let input: Vec<f64> = input.iter().map(|&v| v as f64).collect();
    let target: Vec<f64> = target.iter().map(|&v| v as f64).collect();
    grad_check(&mut m64, &input, &target, eps, max_samples, seed)
}
