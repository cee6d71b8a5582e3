use crate::error::{NnError, Result};
use crate::module::{join, Mode, Module, Param, Slot};
use crate::tensor::Tensor;

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

/// Per-channel batch normalization over `[N, C, ...]` input.
///
/// Train mode normalizes with the mini-batch mean and the biased variance
/// (divisor m = N·H·W), then applies `y = gamma * x_hat + beta`. Running statistics
/// follow `r <- (1 - momentum) * r + momentum * batch_stat` with the same biased
/// variance, and eval mode normalizes with them.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub eps: f64,
    pub momentum: f64,
    cache: Option<Cache>,
}

#[derive(Debug, Clone)]
struct Cache {
    shape: Vec<usize>,
    x_hat: Vec<f64>,
    inv_std: Vec<f64>,
    mode: Mode,
}

/// (N, C, spatial) for `[N, C, ...]` shapes.
fn layout(shape: &[usize]) -> Result<(usize, usize, usize)> {
    if shape.len() < 2 {
        return Err(NnError::ShapeMismatch(format!(
            "batch norm expects [N, C, ...] input, got {shape:?}"
        )));
    }
    Ok((shape[0], shape[1], shape[2..].iter().product()))
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self::with_config(channels, DEFAULT_EPS, DEFAULT_MOMENTUM)
    }

    pub fn with_config(channels: usize, eps: f64, momentum: f64) -> Self {
        assert!(eps >= 0.0, "batch norm epsilon must be non-negative");
        assert!(momentum > 0.0 && momentum < 1.0, "batch norm momentum must lie in (0, 1)");
        Self {
            gamma: Param::new(Tensor::full(&[channels], 1.0), true),
            beta: Param::new(Tensor::zeros(&[channels]), true),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], 1.0),
            eps,
            momentum,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value.numel()
    }
}

impl Module for BatchNorm {
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let (n, c, s) = layout(input.shape())?;
        if c != self.channels() {
            return Err(NnError::ShapeMismatch(format!(
                "batch norm has {} channels, input has {c}",
                self.channels()
            )));
        }
        let x = input.data();
        let (mean, var) = match mode {
            Mode::Train => {
                if n < 2 {
                    return Err(NnError::BatchTooSmall(n));
                }
                let m = (n * s) as f64;
                let mut mean = vec![0.0; c];
                let mut var = vec![0.0; c];
                for b in 0..n {
                    for ch in 0..c {
                        mean[ch] += x[(b * c + ch) * s..][..s].iter().sum::<f64>();
                    }
                }
                mean.iter_mut().for_each(|v| *v /= m);
                for b in 0..n {
                    for ch in 0..c {
                        let mu = mean[ch];
                        var[ch] += x[(b * c + ch) * s..][..s]
                            .iter()
                            .map(|v| (v - mu) * (v - mu))
                            .sum::<f64>();
                    }
                }
                var.iter_mut().for_each(|v| *v /= m);
                let mom = self.momentum;
                for (r, b) in self.running_mean.data_mut().iter_mut().zip(&mean) {
                    *r = (1.0 - mom) * *r + mom * b;
                }
                for (r, b) in self.running_var.data_mut().iter_mut().zip(&var) {
                    *r = (1.0 - mom) * *r + mom * b;
                }
                (mean, var)
            }
            Mode::Eval => (
                self.running_mean.data().to_vec(),
                self.running_var.data().to_vec(),
            ),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let gamma = self.gamma.value.data();
        let beta = self.beta.value.data();
        let mut x_hat = vec![0.0; x.len()];
        let mut y = vec![0.0; x.len()];
        for b in 0..n {
            for ch in 0..c {
                let off = (b * c + ch) * s;
                for i in off..off + s {
                    let xh = (x[i] - mean[ch]) * inv_std[ch];
                    x_hat[i] = xh;
                    y[i] = gamma[ch] * xh + beta[ch];
                }
            }
        }
        self.cache = Some(Cache {
            shape: input.shape().to_vec(),
            x_hat,
            inv_std,
            mode,
        });
        Tensor::new(input.shape(), y)?.check_finite("batch norm")
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let cache = self.cache.as_ref().ok_or(NnError::NoForwardCache("batch norm"))?;
        if grad_output.shape() != cache.shape.as_slice() {
            return Err(NnError::ShapeMismatch(format!(
                "batch norm grad {:?} vs forward {:?}",
                grad_output.shape(),
                cache.shape
            )));
        }
        let (n, c, s) = layout(&cache.shape)?;
        let dy = grad_output.data();
        let mut dgamma = vec![0.0; c];
        let mut dbeta = vec![0.0; c];
        for b in 0..n {
            for ch in 0..c {
                let off = (b * c + ch) * s;
                for (g, xh) in dy[off..off + s].iter().zip(&cache.x_hat[off..off + s]) {
                    dgamma[ch] += g * xh;
                    dbeta[ch] += g;
                }
            }
        }
        let gamma = self.gamma.value.data();
        let m = (n * s) as f64;
        let mut dx = vec![0.0; dy.len()];
        for b in 0..n {
            for ch in 0..c {
                let off = (b * c + ch) * s;
                let scale = gamma[ch] * cache.inv_std[ch];
                for i in off..off + s {
                    dx[i] = match cache.mode {
                        // Batch statistics depend on x: project out the mean and x_hat directions.
                        Mode::Train => {
                            scale * (dy[i] - dbeta[ch] / m - cache.x_hat[i] * dgamma[ch] / m)
                        }
                        Mode::Eval => scale * dy[i],
                    };
                }
            }
        }
        for (g, d) in self.gamma.value.grad_mut().iter_mut().zip(&dgamma) {
            *g += d;
        }
        for (g, d) in self.beta.value.grad_mut().iter_mut().zip(&dbeta) {
            *g += d;
        }
        Tensor::new(&cache.shape, dx)
    }

    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        f(&join(prefix, "gamma"), Slot::Param(&mut self.gamma));
        f(&join(prefix, "beta"), Slot::Param(&mut self.beta));
        f(&join(prefix, "running_mean"), Slot::Buffer(&mut self.running_mean));
        f(&join(prefix, "running_var"), Slot::Buffer(&mut self.running_var));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(values: &[f64]) -> Tensor {
        Tensor::new(&[values.len(), 1], values.to_vec()).unwrap()
    }

    #[test]
    fn hand_computed_batch() {
        // mu = 2.5, var = 1.25 (divisor m), y = (x - mu) / sqrt(1.25)
        let mut bn = BatchNorm::with_config(1, 0.0, 0.1);
        let y = bn.forward(&column(&[1.0, 2.0, 3.0, 4.0]), Mode::Train).unwrap();
        let expect = [-1.3416, -0.4472, 0.4472, 1.3416];
        for (a, b) in y.data().iter().zip(expect) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        assert!((bn.running_mean.data()[0] - 0.25).abs() < 1e-12);
        assert!((bn.running_var.data()[0] - (0.9 + 0.125)).abs() < 1e-12);
    }

    #[test]
    fn affine_shift_and_scale() {
        let mut bn = BatchNorm::with_config(1, 0.0, 0.1);
        bn.gamma.value.data_mut()[0] = 2.0;
        bn.beta.value.data_mut()[0] = 3.0;
        let y = bn.forward(&column(&[0.3, -1.0, 4.0, 2.5, 7.0]), Mode::Train).unwrap();
        let mean = y.data().iter().sum::<f64>() / 5.0;
        let var = y.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((mean - 3.0).abs() < 1e-12);
        assert!((var - 4.0).abs() < 1e-12);
    }

    #[test]
    fn eval_uses_running_stats() {
        let mut bn = BatchNorm::new(1);
        bn.running_mean.data_mut()[0] = 1.0;
        bn.running_var.data_mut()[0] = 4.0 - DEFAULT_EPS;
        let y = bn.forward(&column(&[3.0]), Mode::Eval).unwrap();
        assert!((y.data()[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn train_mode_needs_two_samples() {
        let mut bn = BatchNorm::new(2);
        let x = Tensor::zeros(&[1, 2, 4, 4]);
        assert_eq!(bn.forward(&x, Mode::Train).unwrap_err(), NnError::BatchTooSmall(1));
        assert!(bn.forward(&x, Mode::Eval).is_ok());
    }

    #[test]
    fn backward_needs_forward() {
        let mut bn = BatchNorm::new(1);
        assert_eq!(
            bn.backward(&column(&[1.0, 2.0])).unwrap_err(),
            NnError::NoForwardCache("batch norm")
        );
    }

    #[test]
    fn constant_upstream_grad_is_annihilated() {
        let mut bn = BatchNorm::new(2);
        let x = Tensor::new(&[4, 2], vec![1.0, -3.0, 0.5, 2.0, 4.0, 0.1, -2.0, 1.5]).unwrap();
        bn.forward(&x, Mode::Train).unwrap();
        let dx = bn.backward(&Tensor::full(&[4, 2], 0.7)).unwrap();
        for ch in 0..2 {
            let s: f64 = (0..4).map(|b| dx.data()[b * 2 + ch]).sum();
            assert!(s.abs() < 1e-12);
        }
        for &db in bn.beta.value.grad().unwrap() {
            assert!((db - 2.8).abs() < 1e-12);
        }
    }
}
