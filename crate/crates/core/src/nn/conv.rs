//! 2-D convolution layer (cross-correlation plus bias).

use crate::error::{Error, Result};
use crate::nn::{Real, Tensor};

/// Convolution layer. Weights are stored as `[ky][kx][in][out]` with `out`
/// fastest, which keeps the inner loops of forward and backward contiguous
/// in both the weights and the HWC activations.
#[derive(Debug, Clone)]
pub struct ConvLayer<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Parameter gradients from [`ConvLayer::backward`], same layouts as the
/// layer's own buffers.
#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> ConvLayer<T> {
    /// Zero-initialized layer with the given geometry.
    pub fn zeros(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || kernel_size == 0 || stride == 0 {
            return Err(Error::invalid("conv dimensions and stride must be nonzero"));
        }
        Ok(ConvLayer {
            in_channels,
            out_channels,
            kernel_size,
            stride,
            padding,
            weights: vec![T::ZERO; kernel_size * kernel_size * in_channels * out_channels],
            bias: vec![T::ZERO; out_channels],
        })
    }

    #[inline]
    pub fn weight_index(&self, ky: usize, kx: usize, ci: usize, co: usize) -> usize {
        ((ky * self.kernel_size + kx) * self.in_channels + ci) * self.out_channels + co
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Output spatial extent for an input extent, or None if the input is
    /// too small.
    fn out_extent(&self, input: usize) -> Option<usize> {
        let padded = input + 2 * self.padding;
        if padded < self.kernel_size {
            return None;
        }
        Some((padded - self.kernel_size) / self.stride + 1)
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<(usize, usize)> {
        if input.channels() != self.in_channels {
            return Err(Error::invalid(format!(
                "conv expects {} input channels, got {}",
                self.in_channels,
                input.channels()
            )));
        }
        match (self.out_extent(input.height()), self.out_extent(input.width())) {
            (Some(h), Some(w)) => Ok((h, w)),
            _ => Err(Error::invalid(format!(
                "input {}x{} smaller than {} kernel",
                input.height(),
                input.width(),
                self.kernel_size
            ))),
        }
    }

    /// Valid cross-correlation plus bias; zero padding outside the input.
    /// Output extent is `(n + 2·padding − kernel)/stride + 1` per axis.
    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let (out_h, out_w) = self.check_input(input)?;
        let mut out = Tensor::zeros(out_h, out_w, self.out_channels);
        let (h, w) = (input.height() as isize, input.width() as isize);
        let ci = self.in_channels;
        let co = self.out_channels;
        for oy in 0..out_h {
            let y0 = (oy * self.stride) as isize - self.padding as isize;
            for ox in 0..out_w {
                let x0 = (ox * self.stride) as isize - self.padding as isize;
                let acc =
                    &mut out.data_mut()[(oy * out_w + ox) * co..(oy * out_w + ox + 1) * co];
                acc.copy_from_slice(&self.bias);
                for ky in 0..self.kernel_size {
                    let y = y0 + ky as isize;
                    if y < 0 || y >= h {
                        continue;
                    }
                    for kx in 0..self.kernel_size {
                        let x = x0 + kx as isize;
                        if x < 0 || x >= w {
                            continue;
                        }
                        let px = ((y as usize) * w as usize + x as usize) * ci;
                        let pixel = &input.data()[px..px + ci];
                        let wbase = ((ky * self.kernel_size + kx) * ci) * co;
                        for (i, &v) in pixel.iter().enumerate() {
                            let wrow = &self.weights[wbase + i * co..wbase + (i + 1) * co];
                            for (a, &wv) in acc.iter_mut().zip(wrow.iter()) {
                                *a += v * wv;
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Analytic gradients of the convolution. `grad_out` is the loss
    /// gradient at the forward output; returns parameter gradients and the
    /// gradient at the input.
    pub fn backward(
        &self,
        input: &Tensor<T>,
        grad_out: &Tensor<T>,
    ) -> Result<(ConvGrads<T>, Tensor<T>)> {
        let (out_h, out_w) = self.check_input(input)?;
        if grad_out.height() != out_h
            || grad_out.width() != out_w
            || grad_out.channels() != self.out_channels
        {
            return Err(Error::invalid(format!(
                "upstream gradient {}x{}x{} does not match forward output {}x{}x{}",
                grad_out.height(),
                grad_out.width(),
                grad_out.channels(),
                out_h,
                out_w,
                self.out_channels
            )));
        }
        let mut gw = vec![T::ZERO; self.weights.len()];
        let mut gb = vec![T::ZERO; self.out_channels];
        let mut gin = Tensor::zeros(input.height(), input.width(), self.in_channels);
        let (h, w) = (input.height() as isize, input.width() as isize);
        let ci = self.in_channels;
        let co = self.out_channels;
        for oy in 0..out_h {
            let y0 = (oy * self.stride) as isize - self.padding as isize;
            for ox in 0..out_w {
                let x0 = (ox * self.stride) as isize - self.padding as isize;
                let go = &grad_out.data()[(oy * out_w + ox) * co..(oy * out_w + ox + 1) * co];
                for (b, &g) in gb.iter_mut().zip(go.iter()) {
                    *b += g;
                }
                for ky in 0..self.kernel_size {
                    let y = y0 + ky as isize;
                    if y < 0 || y >= h {
                        continue;
                    }
                    for kx in 0..self.kernel_size {
                        let x = x0 + kx as isize;
                        if x < 0 || x >= w {
                            continue;
                        }
                        let px = ((y as usize) * w as usize + x as usize) * ci;
                        let wbase = ((ky * self.kernel_size + kx) * ci) * co;
                        let gp = &mut gin.data_mut()[px..px + ci];
                        for i in 0..ci {
                            let v = input.data()[px + i];
                            let wrow = &self.weights[wbase + i * co..wbase + (i + 1) * co];
                            let gwrow = &mut gw[wbase + i * co..wbase + (i + 1) * co];
                            let mut acc = T::ZERO;
                            for ((&g, &wv), gww) in
                                go.iter().zip(wrow.iter()).zip(gwrow.iter_mut())
                            {
                                *gww += v * g;
                                acc += wv * g;
                            }
                            gp[i] += acc;
                        }
                    }
                }
            }
        }
        Ok((
            ConvGrads {
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
        ci: usize,
        co: usize,
        k: usize,
        stride: usize,
        padding: usize,
    ) -> ConvLayer<f64> {
        let mut l = ConvLayer::zeros(ci, co, k, stride, padding).unwrap();
        for w in &mut l.weights {
            *w = rng.random_range(-0.5..0.5);
        }
        for b in &mut l.bias {
            *b = rng.random_range(-0.5..0.5);
        }
        l
    }

    fn random_tensor(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Tensor<f64> {
        let data = (0..h * w * c).map(|_| rng.random_range(-1.0..1.0)).collect();
        Tensor::from_data(h, w, c, data).unwrap()
    }

    #[test]
    fn output_shapes_follow_formula() {
        let l: ConvLayer<f32> = ConvLayer::zeros(1, 64, 9, 1, 0).unwrap();
        let out = l.forward(&Tensor::zeros(33, 33, 1)).unwrap();
        assert_eq!((out.height(), out.width(), out.channels()), (25, 25, 64));

        let l2: ConvLayer<f32> = ConvLayer::zeros(64, 32, 1, 1, 0).unwrap();
        let out2 = l2.forward(&Tensor::zeros(25, 25, 64)).unwrap();
        assert_eq!((out2.height(), out2.width(), out2.channels()), (25, 25, 32));

        // Formula holds for every kernel size up to the input extent.
        for k in 1..=8 {
            let l: ConvLayer<f32> = ConvLayer::zeros(1, 1, k, 1, 0).unwrap();
            let out = l.forward(&Tensor::zeros(8, 8, 1)).unwrap();
            assert_eq!(out.height(), 8 - k + 1);
        }
    }

    #[test]
    fn channel_mismatch_rejected() {
        let l: ConvLayer<f32> = ConvLayer::zeros(3, 4, 3, 1, 0).unwrap();
        assert!(l.forward(&Tensor::zeros(8, 8, 2)).is_err());
    }

    #[test]
    fn delta_kernel_is_identity_on_valid_region() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let input = random_tensor(&mut rng, 7, 7, 1);
        let mut l: ConvLayer<f64> = ConvLayer::zeros(1, 1, 3, 1, 0).unwrap();
        let center = l.weight_index(1, 1, 0, 0);
        l.weights[center] = 1.0;
        let out = l.forward(&input).unwrap();
        assert_eq!((out.height(), out.width()), (5, 5));
        for y in 0..5 {
            for x in 0..5 {
                assert_eq!(out.get(y, x, 0), input.get(y + 1, x + 1, 0));
            }
        }
    }

    #[test]
    fn forward_matches_naive_oracle() {
        // Oracle: direct quadruple loop straight from the definition.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for &(ci, co, k, stride, padding) in
            &[(2usize, 3usize, 3usize, 1usize, 0usize), (3, 2, 3, 2, 1), (1, 4, 5, 1, 2)]
        {
            let l = random_layer(&mut rng, ci, co, k, stride, padding);
            let input = random_tensor(&mut rng, 9, 8, ci);
            let out = l.forward(&input).unwrap();
            for oy in 0..out.height() {
                for ox in 0..out.width() {
                    for o in 0..co {
                        let mut acc = l.bias[o];
                        for ky in 0..k {
                            for kx in 0..k {
                                let y = (oy * stride + ky) as isize - padding as isize;
                                let x = (ox * stride + kx) as isize - padding as isize;
                                if y < 0
                                    || x < 0
                                    || y >= input.height() as isize
                                    || x >= input.width() as isize
                                {
                                    continue;
                                }
                                for i in 0..ci {
                                    acc += input.get(y as usize, x as usize, i)
                                        * l.weights[l.weight_index(ky, kx, i, o)];
                                }
                            }
                        }
                        assert!(
                            (out.get(oy, ox, o) - acc).abs() < 1e-12,
                            "mismatch at ({},{},{})",
                            oy,
                            ox,
                            o
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let l = random_layer(&mut rng, 2, 3, 3, 1, 0);
        let input = random_tensor(&mut rng, 6, 6, 2);
        let out = l.forward(&input).unwrap();
        let zeros = Tensor::zeros(out.height(), out.width(), out.channels());
        let (grads, gin) = l.backward(&input, &zeros).unwrap();
        assert!(grads.weights.iter().all(|&g| g == 0.0));
        assert!(grads.bias.iter().all(|&g| g == 0.0));
        assert!(gin.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn grad_bias_is_upstream_channel_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let l = random_layer(&mut rng, 1, 3, 3, 1, 0);
        let input = random_tensor(&mut rng, 7, 7, 1);
        let up = random_tensor(&mut rng, 5, 5, 3);
        let (grads, _) = l.backward(&input, &up).unwrap();
        for o in 0..3 {
            let mut sum = 0.0;
            for y in 0..5 {
                for x in 0..5 {
                    sum += up.get(y, x, o);
                }
            }
            assert!((grads.bias[o] - sum).abs() < 1e-12);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        // Loss = sum(out * up) so dLoss/dout = up; compare every parameter
        // and input gradient against centered differences in f64.
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for &(ci, co, k, stride, padding) in &[(1usize, 2usize, 3usize, 1usize, 0usize), (2, 2, 3, 2, 1)] {
            let l = random_layer(&mut rng, ci, co, k, stride, padding);
            let input = random_tensor(&mut rng, 7, 7, ci);
            let out = l.forward(&input).unwrap();
            let up = random_tensor(&mut rng, out.height(), out.width(), co);
            let loss = |layer: &ConvLayer<f64>, inp: &Tensor<f64>| -> f64 {
                let o = layer.forward(inp).unwrap();
                o.data().iter().zip(up.data().iter()).map(|(&a, &b)| a * b).sum()
            };
            let (grads, gin) = l.backward(&input, &up).unwrap();
            let eps = 1e-6;
            for idx in 0..l.weights.len() {
                let mut lp = l.clone();
                lp.weights[idx] += eps;
                let mut lm = l.clone();
                lm.weights[idx] -= eps;
                let numeric = (loss(&lp, &input) - loss(&lm, &input)) / (2.0 * eps);
                assert!(
                    (grads.weights[idx] - numeric).abs() < 1e-7,
                    "weight {}: {} vs {}",
                    idx,
                    grads.weights[idx],
                    numeric
                );
            }
            for idx in 0..l.bias.len() {
                let mut lp = l.clone();
                lp.bias[idx] += eps;
                let mut lm = l.clone();
                lm.bias[idx] -= eps;
                let numeric = (loss(&lp, &input) - loss(&lm, &input)) / (2.0 * eps);
                assert!((grads.bias[idx] - numeric).abs() < 1e-7);
            }
            for idx in 0..input.data().len() {
                let mut ip = input.clone();
                ip.data_mut()[idx] += eps;
                let mut im = input.clone();
                im.data_mut()[idx] -= eps;
                let numeric = (loss(&l, &ip) - loss(&l, &im)) / (2.0 * eps);
                assert!(
                    (gin.data()[idx] - numeric).abs() < 1e-7,
                    "input {}: {} vs {}",
                    idx,
                    gin.data()[idx],
                    numeric
                );
            }
        }
    }

    #[test]
    fn upstream_shape_mismatch_rejected() {
        let l: ConvLayer<f32> = ConvLayer::zeros(1, 2, 3, 1, 0).unwrap();
        let input = Tensor::zeros(7, 7, 1);
        let bad = Tensor::zeros(4, 5, 2);
        assert!(l.backward(&input, &bad).is_err());
    }
}
