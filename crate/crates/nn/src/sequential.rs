use crate::activation::{GlobalAvgPool, Relu};
use crate::batchnorm::BatchNorm;
use crate::conv::Conv2d;
use crate::error::{NnError, Result};
use crate::linear::Linear;
use crate::module::{join, Mode, Module, Slot};
use crate::residual::ResidualBlock;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub enum Layer {
    Conv(Conv2d),
    BatchNorm(BatchNorm),
    Relu(Relu),
    GlobalAvgPool(GlobalAvgPool),
    Linear(Linear),
    Residual(Box<ResidualBlock>),
}

impl Layer {
    pub fn as_module(&mut self) -> &mut dyn Module {
        match self {
            Layer::Conv(l) => l,
            Layer::BatchNorm(l) => l,
            Layer::Relu(l) => l,
            Layer::GlobalAvgPool(l) => l,
            Layer::Linear(l) => l,
            Layer::Residual(l) => l.as_mut(),
        }
    }

    pub fn conv_count(&self) -> usize {
        match self {
            Layer::Conv(_) => 1,
            Layer::Residual(b) => b.conv_count(),
            _ => 0,
        }
    }
}

/// Ordered chain of named layers.
#[derive(Debug, Clone, Default)]
pub struct Sequential {
    layers: Vec<(String, Layer)>,
}

impl Sequential {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, layer: Layer) -> &mut Self {
        self.layers.push((name.into(), layer));
        self
    }

    pub fn with(mut self, name: impl Into<String>, layer: Layer) -> Self {
        self.push(name, layer);
        self
    }

    pub fn layers(&self) -> impl Iterator<Item = (&str, &Layer)> {
        self.layers.iter().map(|(n, l)| (n.as_str(), l))
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = (&str, &mut Layer)> {
        self.layers.iter_mut().map(|(n, l)| (n.as_str(), l))
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn conv_count(&self) -> usize {
        self.layers.iter().map(|(_, l)| l.conv_count()).sum()
    }
}

impl Module for Sequential {
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut x = input.clone();
        for (_, layer) in self.layers.iter_mut() {
            x = layer.as_module().forward(&x, mode)?;
        }
        Ok(x)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        if self.layers.is_empty() {
            return Ok(grad_output.clone());
        }
        let mut g = grad_output.clone();
        for (_, layer) in self.layers.iter_mut().rev() {
            g = layer.as_module().backward(&g)?;
        }
        if !g.is_finite() {
            return Err(NnError::NonFinite("backward pass"));
        }
        Ok(g)
    }

    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        for (name, layer) in self.layers.iter_mut() {
            layer.as_module().visit(&join(prefix, name), f);
        }
    }
}
