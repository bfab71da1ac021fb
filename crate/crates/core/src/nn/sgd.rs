//! Stochastic gradient descent with classical momentum.

use crate::error::{Error, Result};
use crate::nn::Real;

/// Hyperparameters for one SGD run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub iterations: usize,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must be in [0, 1)"));
        }
        if self.batch_size == 0 || self.iterations == 0 {
            return Err(Error::invalid("batch size and iterations must be positive"));
        }
        Ok(())
    }
}

/// Velocity state for one parameter tensor. The update is
/// `v ← momentum·v + grad; p ← p − lr·v`, so momentum 0 recovers plain SGD.
#[derive(Debug, Clone)]
pub struct SgdState<T> {
    velocity: Vec<T>,
}

impl<T: Real> SgdState<T> {
    pub fn new(len: usize) -> Self {
        SgdState {
            velocity: vec![T::ZERO; len],
        }
    }

    pub fn step(
        &mut self,
        params: &mut [T],
        grads: &[T],
        learning_rate: f64,
        momentum: f64,
    ) -> Result<()> {
        if params.len() != self.velocity.len() || grads.len() != self.velocity.len() {
            return Err(Error::invalid(format!(
                "sgd_step over mismatched lengths {}/{}/{}",
                params.len(),
                grads.len(),
                self.velocity.len()
            )));
        }
        let lr = T::from_f64(learning_rate);
        let m = T::from_f64(momentum);
        for ((p, v), &g) in params.iter_mut().zip(self.velocity.iter_mut()).zip(grads) {
            *v = m * *v + g;
            *p -= lr * *v;
        }
        Ok(())
    }
}
