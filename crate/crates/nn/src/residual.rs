use crate::activation::Relu;
use crate::error::{NnError, Result};
use crate::module::{join, Mode, Module, Slot};
use crate::sequential::Sequential;
use crate::tensor::Tensor;

/// `relu(body(x) + shortcut(x))`, with the identity as the default shortcut.
#[derive(Debug, Clone)]
pub struct ResidualBlock {
    pub body: Sequential,
    pub shortcut: Option<Sequential>,
    relu: Relu,
}

impl ResidualBlock {
    pub fn new(body: Sequential, shortcut: Option<Sequential>) -> Self {
        Self {
            body,
            shortcut,
            relu: Relu::new(),
        }
    }

    pub fn has_projection(&self) -> bool {
        self.shortcut.is_some()
    }

    pub fn conv_count(&self) -> usize {
        self.body.conv_count() + self.shortcut.as_ref().map_or(0, |s| s.conv_count())
    }
}

impl Module for ResidualBlock {
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let main = self.body.forward(input, mode)?;
        let skip = match self.shortcut.as_mut() {
            Some(s) => s.forward(input, mode)?,
            None => input.clone(),
        };
        if main.shape() != skip.shape() {
            return Err(NnError::ShapeMismatch(format!(
                "residual branch {:?} vs shortcut {:?}",
                main.shape(),
                skip.shape()
            )));
        }
        let mut sum = main;
        sum.data_mut().iter_mut().zip(skip.data()).for_each(|(a, b)| *a += b);
        self.relu.forward(&sum, mode)
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let g = self.relu.backward(grad_output)?;
        let mut dx = self.body.backward(&g)?;
        let dskip = match self.shortcut.as_mut() {
            Some(s) => s.backward(&g)?,
            None => g,
        };
        dx.data_mut().iter_mut().zip(dskip.data()).for_each(|(a, b)| *a += b);
        Ok(dx)
    }

    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        self.body.visit(&join(prefix, "body"), f);
        if let Some(s) = self.shortcut.as_mut() {
            s.visit(&join(prefix, "shortcut"), f);
        }
    }
}
