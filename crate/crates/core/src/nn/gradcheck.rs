//! Finite-difference validation of analytic gradients.
//!
//! Models expose their parameters as one flat `f64` vector; the checker
//! perturbs sampled entries by ±ε and compares centered differences of the
//! loss against the model's backpropagated gradients.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Models whose gradients can be checked numerically. Implementations run
/// in `f64`; `f32` models should be converted first.
pub trait GradCheckable {
    type Input;
    type Target;

    fn flat_params(&self) -> Vec<f64>;
    fn set_flat_params(&mut self, params: &[f64]) -> Result<()>;
    /// Scalar training loss on one example.
    fn loss_on(&self, input: &Self::Input, target: &Self::Target) -> Result<f64>;
    /// Backpropagated loss gradient, same flat layout as `flat_params`.
    fn analytic_grads(&self, input: &Self::Input, target: &Self::Target) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub checked: usize,
}

/// Checks up to `max_samples` parameters (all of them when the model is
/// small enough; a seeded sample without replacement otherwise). Relative
/// error is `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<M: GradCheckable>(
    model: &mut M,
    input: &M::Input,
    target: &M::Target,
    eps: f64,
    max_samples: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    if !(eps > 0.0) {
        return Err(Error::invalid("gradcheck eps must be positive"));
    }
    if max_samples == 0 {
        return Err(Error::invalid("gradcheck needs at least one sample"));
    }
    let analytic = model.analytic_grads(input, target)?;
    let mut params = model.flat_params();
    let n = params.len();
    let indices: Vec<usize> = if max_samples >= n {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::index::sample(&mut rng, n, max_samples).into_vec()
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_index: 0,
        checked: indices.len(),
    };
    for &idx in &indices {
        let saved = params[idx];
        params[idx] = saved + eps;
        model.set_flat_params(&params)?;
        let lp = model.loss_on(input, target)?;
        params[idx] = saved - eps;
        model.set_flat_params(&params)?;
        let lm = model.loss_on(input, target)?;
        params[idx] = saved;
        let numeric = (lp - lm) / (2.0 * eps);
        let a = analytic[idx];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_index = idx;
        }
    }
    model.set_flat_params(&params)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{mse_loss, Activation, DenseLayer};

    /// One dense layer trained with MSE — gradients known in closed form.
    struct TinyModel {
        layer: DenseLayer<f64>,
    }

    impl GradCheckable for TinyModel {
        type Input = Vec<f64>;
        type Target = Vec<f64>;

        fn flat_params(&self) -> Vec<f64> {
            let mut p = self.layer.weights.clone();
            p.extend_from_slice(&self.layer.bias);
            p
        }

        fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
            let nw = self.layer.weights.len();
            if params.len() != nw + self.layer.bias.len() {
                return Err(Error::invalid("bad flat length"));
            }
            self.layer.weights.copy_from_slice(&params[..nw]);
            self.layer.bias.copy_from_slice(&params[nw..]);
            Ok(())
        }

        fn loss_on(&self, input: &Vec<f64>, target: &Vec<f64>) -> Result<f64> {
            let y = self.layer.forward(input)?;
            Ok(mse_loss(&y, target)?.0)
        }

        fn analytic_grads(&self, input: &Vec<f64>, target: &Vec<f64>) -> Result<Vec<f64>> {
            let z = self.layer.preactivation(input)?;
            let y: Vec<f64> = z.iter().map(|&v| self.layer.activation.apply(v)).collect();
            let (_, dy) = mse_loss(&y, target)?;
            let (grads, _) = self.layer.backward(input, &z, &dy)?;
            let mut g = grads.weights;
            g.extend_from_slice(&grads.bias);
            Ok(g)
        }
    }

    #[test]
    fn linear_model_checks_to_machine_precision() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut layer = DenseLayer::zeros(6, 4, Activation::Linear).unwrap();
        for w in &mut layer.weights {
            *w = rng.random_range(-0.5..0.5);
        }
        let mut model = TinyModel { layer };
        let input: Vec<f64> = (0..6).map(|_| rng.random()).collect();
        let target: Vec<f64> = (0..4).map(|_| rng.random()).collect();
        let report = grad_check(&mut model, &input, &target, 1e-4, usize::MAX, 0).unwrap();
        assert_eq!(report.checked, 28);
        assert!(report.max_rel_err <= 1e-6, "rel {}", report.max_rel_err);
    }

    #[test]
    fn sigmoid_model_passes_tolerance() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut layer = DenseLayer::zeros(8, 5, Activation::Sigmoid).unwrap();
        for w in &mut layer.weights {
            *w = rng.random_range(-0.5..0.5);
        }
        for b in &mut layer.bias {
            *b = rng.random_range(-0.5..0.5);
        }
        let mut model = TinyModel { layer };
        let input: Vec<f64> = (0..8).map(|_| rng.random()).collect();
        let target: Vec<f64> = (0..5).map(|_| rng.random()).collect();
        let report = grad_check(&mut model, &input, &target, 1e-4, usize::MAX, 0).unwrap();
        assert!(report.max_rel_err <= 1e-3, "rel {}", report.max_rel_err);
    }

    #[test]
    fn sampling_limits_checked_count() {
        let layer = DenseLayer::zeros(6, 4, Activation::Linear).unwrap();
        let mut model = TinyModel { layer };
        let input = vec![0.5; 6];
        let target = vec![0.25; 4];
        let report = grad_check(&mut model, &input, &target, 1e-4, 10, 7).unwrap();
        assert_eq!(report.checked, 10);
    }

    #[test]
    fn deliberately_wrong_gradient_is_caught() {
        struct Broken(TinyModel);
        impl GradCheckable for Broken {
            type Input = Vec<f64>;
            type Target = Vec<f64>;
            fn flat_params(&self) -> Vec<f64> {
                self.0.flat_params()
            }
            fn set_flat_params(&mut self, p: &[f64]) -> Result<()> {
                self.0.set_flat_params(p)
            }
            fn loss_on(&self, i: &Vec<f64>, t: &Vec<f64>) -> Result<f64> {
                self.0.loss_on(i, t)
            }
            fn analytic_grads(&self, i: &Vec<f64>, t: &Vec<f64>) -> Result<Vec<f64>> {
                // Off by a factor of 2 — the checker must flag it.
                Ok(self.0.analytic_grads(i, t)?.iter().map(|g| g * 2.0).collect())
            }
        }
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(15);
        let mut layer = DenseLayer::zeros(5, 3, Activation::Linear).unwrap();
        for w in &mut layer.weights {
            *w = rng.random_range(-0.5..0.5);
        }
        let mut model = Broken(TinyModel { layer });
        let input: Vec<f64> = (0..5).map(|_| rng.random()).collect();
        let target = vec![0.0; 3];
        let report = grad_check(&mut model, &input, &target, 1e-4, usize::MAX, 0).unwrap();
        assert!(report.max_rel_err > 0.3);
    }
}
