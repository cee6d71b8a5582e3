use crate::error::Result;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A learnable tensor. `decay` marks whether L2 regularization applies to it.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub decay: bool,
}

impl Param {
    pub fn new(value: Tensor, decay: bool) -> Self {
        Self { value, decay }
    }
}

/// Named view of a module's state handed to visitors.
pub enum Slot<'a> {
    Param(&'a mut Param),
    /// Non-learned state such as batch-norm running statistics.
    Buffer(&'a mut Tensor),
}

pub trait Module {
    fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor>;

    /// Propagates `grad_output` back through the cached forward pass, accumulating
    /// parameter gradients and returning the gradient with respect to the input.
    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor>;

    /// Visits every parameter and buffer in a stable order.
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>));

    fn zero_grad(&mut self) {
        self.visit("", &mut |_, slot| {
            if let Slot::Param(p) = slot {
                p.value.zero_grad();
            }
        });
    }

    fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, slot| {
            if let Slot::Param(p) = slot {
                n += p.value.numel();
            }
        });
        n
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}
