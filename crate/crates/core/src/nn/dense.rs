//! Fully connected layer with a built-in activation.

use crate::error::{Error, Result};
use crate::nn::{Activation, Real};

/// Dense layer computing `activation(W·x + b)`. Weights are `[out][in]`
/// row-major so each output unit's weights are contiguous.
#[derive(Debug, Clone)]
pub struct DenseLayer<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

/// Parameter gradients from [`DenseLayer::backward`].
#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> DenseLayer<T> {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::invalid("dense dimensions must be nonzero"));
        }
        Ok(DenseLayer {
            in_dim,
            out_dim,
            weights: vec![T::ZERO; in_dim * out_dim],
            bias: vec![T::ZERO; out_dim],
            activation,
        })
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn check_input(&self, input: &[T]) -> Result<()> {
        if input.len() != self.in_dim {
            return Err(Error::invalid(format!(
                "dense expects input length {}, got {}",
                self.in_dim,
                input.len()
            )));
        }
        Ok(())
    }

    /// Pre-activation `W·x + b`.
    pub fn preactivation(&self, input: &[T]) -> Result<Vec<T>> {
        self.check_input(input)?;
        let mut z = Vec::with_capacity(self.out_dim);
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.bias[o];
            for (&w, &x) in row.iter().zip(input.iter()) {
                acc += w * x;
            }
            z.push(acc);
        }
        Ok(z)
    }

    /// `activation(W·x + b)`.
    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        let mut z = self.preactivation(input)?;
        for v in &mut z {
            *v = self.activation.apply(*v);
        }
        Ok(z)
    }

    /// Backward pass given the input, the cached pre-activation from
    /// [`preactivation`](Self::preactivation), and the loss gradient at the
    /// activated output.
    pub fn backward(
        &self,
        input: &[T],
        preact: &[T],
        grad_out: &[T],
    ) -> Result<(DenseGrads<T>, Vec<T>)> {
        self.check_input(input)?;
        if preact.len() != self.out_dim || grad_out.len() != self.out_dim {
            return Err(Error::invalid(format!(
                "dense backward expects {}-long preact/upstream, got {}/{}",
                self.out_dim,
                preact.len(),
                grad_out.len()
            )));
        }
        let mut gw = vec![T::ZERO; self.weights.len()];
        let mut gb = vec![T::ZERO; self.out_dim];
        let mut gin = vec![T::ZERO; self.in_dim];
        for o in 0..self.out_dim {
            let dz = grad_out[o] * self.activation.derivative(preact[o]);
            gb[o] = dz;
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let grow = &mut gw[o * self.in_dim..(o + 1) * self.in_dim];
            for i in 0..self.in_dim {
                grow[i] = dz * input[i];
                gin[i] += dz * row[i];
            }
        }
        Ok((
            DenseGrads {
                weights: gw,
                bias: gb,
            },
            gin,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_layer(
        rng: &mut ChaCha8Rng,
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
    ) -> DenseLayer<f64> {
        let mut l = DenseLayer::zeros(in_dim, out_dim, activation).unwrap();
        for w in &mut l.weights {
            *w = rng.random_range(-0.5..0.5);
        }
        for b in &mut l.bias {
            *b = rng.random_range(-0.5..0.5);
        }
        l
    }

    #[test]
    fn identity_weights_pass_input_through() {
        let mut l: DenseLayer<f32> = DenseLayer::zeros(4, 4, Activation::Linear).unwrap();
        for i in 0..4 {
            l.weights[i * 4 + i] = 1.0;
        }
        let x = vec![0.1, -0.2, 0.3, 0.4];
        assert_eq!(l.forward(&x).unwrap(), x);
    }

    #[test]
    fn zero_weights_sigmoid_gives_sigmoid_of_bias() {
        let mut l: DenseLayer<f64> = DenseLayer::zeros(3, 2, Activation::Sigmoid).unwrap();
        l.bias = vec![0.0, 2.0];
        let y = l.forward(&[0.5, 0.5, 0.5]).unwrap();
        assert!((y[0] - 0.5).abs() < 1e-12);
        assert!((y[1] - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn forward_matches_naive_dot_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let l = random_layer(&mut rng, 10, 7, Activation::Linear);
        let x: Vec<f64> = (0..10).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = l.forward(&x).unwrap();
        for o in 0..7 {
            let mut acc = l.bias[o];
            for i in 0..10 {
                acc += l.weights[o * 10 + i] * x[i];
            }
            assert!((y[o] - acc).abs() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let l: DenseLayer<f32> = DenseLayer::zeros(4, 2, Activation::Linear).unwrap();
        assert!(l.forward(&[0.0; 3]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let l = random_layer(&mut rng, 5, 4, Activation::Sigmoid);
        let x: Vec<f64> = (0..5).map(|_| rng.random()).collect();
        let z = l.preactivation(&x).unwrap();
        let (grads, gin) = l.backward(&x, &z, &vec![0.0; 4]).unwrap();
        assert!(grads.weights.iter().all(|&g| g == 0.0));
        assert!(grads.bias.iter().all(|&g| g == 0.0));
        assert!(gin.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn linear_grad_w_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let l = random_layer(&mut rng, 6, 3, Activation::Linear);
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let up: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z = l.preactivation(&x).unwrap();
        let (grads, _) = l.backward(&x, &z, &up).unwrap();
        for o in 0..3 {
            for i in 0..6 {
                assert!((grads.weights[o * 6 + i] - up[o] * x[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        // Loss = sum(forward(x) * up). Checked for every activation on a
        // random 12 -> 9 layer.
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for act in [Activation::Linear, Activation::Sigmoid, Activation::Relu] {
            let l = random_layer(&mut rng, 12, 9, act);
            let x: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
            let up: Vec<f64> = (0..9).map(|_| rng.random_range(-1.0..1.0)).collect();
            let loss = |layer: &DenseLayer<f64>, input: &[f64]| -> f64 {
                layer
                    .forward(input)
                    .unwrap()
                    .iter()
                    .zip(up.iter())
                    .map(|(&a, &b)| a * b)
                    .sum()
            };
            let z = l.preactivation(&x).unwrap();
            let (grads, gin) = l.backward(&x, &z, &up).unwrap();
            let eps = 1e-6;
            for idx in 0..l.weights.len() {
                let mut lp = l.clone();
                lp.weights[idx] += eps;
                let mut lm = l.clone();
                lm.weights[idx] -= eps;
                let numeric = (loss(&lp, &x) - loss(&lm, &x)) / (2.0 * eps);
                let rel = (grads.weights[idx] - numeric).abs()
                    / grads.weights[idx].abs().max(numeric.abs()).max(1e-8);
                assert!(rel < 1e-3, "weight {}: rel {}", idx, rel);
            }
            for idx in 0..l.bias.len() {
                let mut lp = l.clone();
                lp.bias[idx] += eps;
                let mut lm = l.clone();
                lm.bias[idx] -= eps;
                let numeric = (loss(&lp, &x) - loss(&lm, &x)) / (2.0 * eps);
                assert!((grads.bias[idx] - numeric).abs() < 1e-7);
            }
            for idx in 0..x.len() {
                let mut xp = x.clone();
                xp[idx] += eps;
                let mut xm = x.clone();
                xm[idx] -= eps;
                let numeric = (loss(&l, &xp) - loss(&l, &xm)) / (2.0 * eps);
                assert!((gin[idx] - numeric).abs() < 1e-7);
            }
        }
    }
}
