use rand::Rng;

use crate::error::{NnError, Result};
use crate::init;
use crate::module::{join, Mode, Module, Param, Slot};
use crate::tensor::Tensor;

/// Dense layer `y = x W^T + b` on `[N, in]` input.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
    cache: Option<Tensor>,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let w = init::kaiming_uniform(&[outputs, inputs], inputs, rng);
        Self::from_weight(w, Tensor::zeros(&[outputs]))
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self::from_weight(Tensor::zeros(&[outputs, inputs]), Tensor::zeros(&[outputs]))
    }

    pub fn from_weight(weight: Tensor, bias: Tensor) -> Self {
        Self {
            weight: Param::new(weight, true),
            bias: Param::new(bias, false),
            cache: None,
        }
    }

    fn dims(&self) -> (usize, usize) {
        let s = self.weight.value.shape();
        (s[1], s[0])
    }
}

impl Module for Linear {
    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        input.expect_rank(2, "linear")?;
        let (inputs, outputs) = self.dims();
        if input.shape()[1] != inputs {
            return Err(NnError::ShapeMismatch(format!(
                "linear expects {inputs} features, got {}",
                input.shape()[1]
            )));
        }
        let n = input.shape()[0];
        let w = self.weight.value.data();
        let b = self.bias.value.data();
        let mut y = vec![0.0; n * outputs];
        for (x, out) in input.data().chunks(inputs).zip(y.chunks_mut(outputs)) {
            for (o, v) in out.iter_mut().enumerate() {
                *v = b[o] + w[o * inputs..(o + 1) * inputs].iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        self.cache = Some(input.clone());
        Tensor::new(&[n, outputs], y)?.check_finite("linear")
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let input = self.cache.as_ref().ok_or(NnError::NoForwardCache("linear"))?;
        let (inputs, outputs) = self.dims();
        let n = input.shape()[0];
        if grad_output.shape() != [n, outputs] {
            return Err(NnError::ShapeMismatch(format!(
                "linear grad {:?} vs output [{n}, {outputs}]",
                grad_output.shape()
            )));
        }
        let dy = grad_output.data();
        {
            let dw = self.weight.value.grad_mut();
            for (x, g) in input.data().chunks(inputs).zip(dy.chunks(outputs)) {
                for (o, &go) in g.iter().enumerate() {
                    for (d, xi) in dw[o * inputs..(o + 1) * inputs].iter_mut().zip(x) {
                        *d += go * xi;
                    }
                }
            }
        }
        {
            let db = self.bias.value.grad_mut();
            for g in dy.chunks(outputs) {
                db.iter_mut().zip(g).for_each(|(d, v)| *d += v);
            }
        }
        let w = self.weight.value.data();
        let mut dx = vec![0.0; n * inputs];
        for (dxr, g) in dx.chunks_mut(inputs).zip(dy.chunks(outputs)) {
            for (o, &go) in g.iter().enumerate() {
                for (d, wv) in dxr.iter_mut().zip(&w[o * inputs..(o + 1) * inputs]) {
                    *d += go * wv;
                }
            }
        }
        Tensor::new(&[n, inputs], dx)
    }

    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        f(&join(prefix, "weight"), Slot::Param(&mut self.weight));
        f(&join(prefix, "bias"), Slot::Param(&mut self.bias));
    }
}
