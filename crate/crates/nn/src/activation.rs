use crate::error::{NnError, Result};
use crate::module::{Mode, Module, Slot};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<(Vec<usize>, Vec<bool>)>,
}

impl Relu {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Module for Relu {
    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let mask: Vec<bool> = input.data().iter().map(|&v| v > 0.0).collect();
        let out = input
            .data()
            .iter()
            .zip(&mask)
            .map(|(&v, &on)| if on { v } else { 0.0 })
            .collect();
        self.mask = Some((input.shape().to_vec(), mask));
        Tensor::new(input.shape(), out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let (shape, mask) = self.mask.as_ref().ok_or(NnError::NoForwardCache("relu"))?;
        if grad_output.shape() != shape.as_slice() {
            return Err(NnError::ShapeMismatch(format!(
                "relu grad {:?} vs forward {:?}",
                grad_output.shape(),
                shape
            )));
        }
        let dx = grad_output
            .data()
            .iter()
            .zip(mask)
            .map(|(&g, &on)| if on { g } else { 0.0 })
            .collect();
        Tensor::new(shape, dx)
    }

    fn visit(&mut self, _prefix: &str, _f: &mut dyn FnMut(&str, Slot<'_>)) {}
}

/// Spatial mean per channel: `[N, C, ...]` to `[N, C]`.
#[derive(Debug, Clone, Default)]
pub struct GlobalAvgPool {
    input_shape: Option<Vec<usize>>,
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Module for GlobalAvgPool {
    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let shape = input.shape();
        if shape.len() < 3 {
            return Err(NnError::ShapeMismatch(format!(
                "global average pool expects [N, C, ...], got {shape:?}"
            )));
        }
        let (n, c) = (shape[0], shape[1]);
        let s: usize = shape[2..].iter().product();
        let out = input
            .data()
            .chunks(s)
            .map(|plane| plane.iter().sum::<f64>() / s as f64)
            .collect();
        self.input_shape = Some(shape.to_vec());
        Tensor::new(&[n, c], out)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let shape = self
            .input_shape
            .as_ref()
            .ok_or(NnError::NoForwardCache("global average pool"))?;
        if grad_output.shape() != &shape[..2] {
            return Err(NnError::ShapeMismatch(format!(
                "pool grad {:?} vs output {:?}",
                grad_output.shape(),
                &shape[..2]
            )));
        }
        let s: usize = shape[2..].iter().product();
        let mut dx = Vec::with_capacity(grad_output.numel() * s);
        for &g in grad_output.data() {
            dx.extend(std::iter::repeat_n(g / s as f64, s));
        }
        Tensor::new(shape, dx)
    }

    fn visit(&mut self, _prefix: &str, _f: &mut dyn FnMut(&str, Slot<'_>)) {}
}
