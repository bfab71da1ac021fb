//! Greedy layer-wise pretraining and end-to-end fine-tuning.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{mse_loss, Activation, DenseGrads, DenseLayer, SgdState};
use crate::sae::{Autoencoder, SaeModel};

/// Configuration shared by pretraining and fine-tuning.
#[derive(Debug, Clone, Copy)]
pub struct SaeTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    /// Early-stopping rule: training ends after `epochs` epochs or once the
    /// relative epoch-MSE improvement drops below this, whichever first.
    pub min_rel_improvement: f64,
    pub hidden_activation: Activation,
    pub seed: u64,
}

impl Default for SaeTrainConfig {
    fn default() -> Self {
        SaeTrainConfig {
            learning_rate: 0.2,
            epochs: 150,
            batch_size: 1,
            momentum: 0.0,
            min_rel_improvement: 1e-4,
            hidden_activation: Activation::Sigmoid,
            seed: 0,
        }
    }
}

impl SaeTrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Generic mini-batch SGD over a chain of dense layers with per-epoch mean
/// MSE tracking and the early-stopping rule.
fn train_chain(
    layers: &mut [&mut DenseLayer<f32>],
    inputs: &[Vec<f32>],
    targets: &[Vec<f32>],
    cfg: &SaeTrainConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::invalid("training set is empty or mismatched"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut states: Vec<(SgdState<f32>, SgdState<f32>)> = layers
        .iter()
        .map(|l| (SgdState::new(l.weights.len()), SgdState::new(l.bias.len())))
        .collect();
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut history: Vec<f64> = Vec::with_capacity(cfg.epochs);

    for _epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_mse = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            let mut acc: Vec<DenseGrads<f32>> = layers
                .iter()
                .map(|l| DenseGrads {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect();
            for &i in chunk {
                // Forward through the chain, caching activations.
                let mut pre = Vec::with_capacity(layers.len());
                let mut post: Vec<Vec<f32>> = Vec::with_capacity(layers.len());
                for (li, layer) in layers.iter().enumerate() {
                    let x = if li == 0 { &inputs[i] } else { &post[li - 1] };
                    let z = layer.preactivation(x)?;
                    let a = z.iter().map(|&v| layer.activation.apply(v)).collect();
                    pre.push(z);
                    post.push(a);
                }
                let (mse, dout) = mse_loss(post.last().unwrap(), &targets[i])?;
                epoch_mse += mse;
                let mut upstream = dout;
                for li in (0..layers.len()).rev() {
                    let x = if li == 0 { &inputs[i] } else { &post[li - 1] };
                    let (g, gin) = layers[li].backward(x, &pre[li], &upstream)?;
                    for (d, s) in acc[li].weights.iter_mut().zip(&g.weights) {
                        *d += s;
                    }
                    for (d, s) in acc[li].bias.iter_mut().zip(&g.bias) {
                        *d += s;
                    }
                    upstream = gin;
                }
            }
            let inv = 1.0 / chunk.len() as f32;
            for (li, layer) in layers.iter_mut().enumerate() {
                for v in &mut acc[li].weights {
                    *v *= inv;
                }
                for v in &mut acc[li].bias {
                    *v *= inv;
                }
                states[li].0.step(
                    &mut layer.weights,
                    &acc[li].weights,
                    cfg.learning_rate,
                    cfg.momentum,
                )?;
                states[li].1.step(
                    &mut layer.bias,
                    &acc[li].bias,
                    cfg.learning_rate,
                    cfg.momentum,
                )?;
            }
        }
        let mean = epoch_mse / inputs.len() as f64;
        if let Some(&prev) = history.last() {
            // Relative improvement below threshold (or a regression) stops;
            // a loss already at zero counts as converged.
            let rel = if prev > 0.0 { (prev - mean) / prev } else { 0.0 };
            if rel < cfg.min_rel_improvement {
                history.push(mean);
                break;
            }
        }
        history.push(mean);
    }
    Ok(history)
}

/// Greedy pretraining of one auto-encoder stage: hidden layer with
/// `cfg.hidden_activation`, linear reconstruction, MSE objective on the
/// data itself. Returns the trained pair and per-epoch mean MSE.
pub fn pretrain_layer(
    data: &[Vec<f32>],
    in_dim: usize,
    hidden_dim: usize,
    cfg: &SaeTrainConfig,
) -> Result<(Autoencoder<f32>, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::invalid("pretraining needs at least one vector"));
    }
    for v in data {
        if v.len() != in_dim {
            return Err(Error::invalid(format!(
                "pretraining vector length {} does not match in_dim {}",
                v.len(),
                in_dim
            )));
        }
    }
    let mut ae = Autoencoder::random(in_dim, hidden_dim, cfg.hidden_activation, cfg.seed)?;
    let history = {
        let mut layers = [&mut ae.encoder, &mut ae.decoder];
        train_chain(&mut layers, data, data, cfg)?
    };
    ae.pretrained = true;
    Ok((ae, history))
}

/// Encodes a dataset through an already-trained stage, producing the inputs
/// for the next pretraining stage.
pub fn encode_dataset(ae: &Autoencoder<f32>, data: &[Vec<f32>]) -> Result<Vec<Vec<f32>>> {
    data.iter().map(|v| ae.encoder.forward(v)).collect()
}

/// Stacks four pretrained auto-encoders with a fresh linear output layer
/// and fine-tunes the whole 1089-1000-2000-2600-2000-441 network on
/// supervised (input, target) pairs. Returns the model and per-epoch MSE.
pub fn stack_and_fine_tune(
    autoencoders: &[Autoencoder<f32>],
    pairs: &[(Vec<f32>, Vec<f32>)],
    cfg: &SaeTrainConfig,
) -> Result<(SaeModel<f32>, Vec<f64>)> {
    let mut model = SaeModel::from_autoencoders(autoencoders, cfg.seed)?;
    if pairs.is_empty() {
        return Err(Error::invalid("fine-tuning needs at least one pair"));
    }
    for (x, t) in pairs {
        if x.len() != 1089 || t.len() != 441 {
            return Err(Error::invalid(
                "fine-tuning pairs must be 1089-vectors with 441-vector targets",
            ));
        }
    }
    let inputs: Vec<Vec<f32>> = pairs.iter().map(|(x, _)| x.clone()).collect();
    let targets: Vec<Vec<f32>> = pairs.iter().map(|(_, t)| t.clone()).collect();
    let history = {
        let mut layers: Vec<&mut DenseLayer<f32>> = model.encoders.iter_mut().collect();
        layers.push(&mut model.output_layer);
        train_chain(&mut layers, &inputs, &targets, cfg)?
    };
    model.trained = true;
    Ok((model, history))
}
