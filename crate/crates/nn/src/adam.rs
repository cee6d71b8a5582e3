use crate::error::{NnError, Result};
use crate::module::{Module, Param, Slot};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Coupled L2 factor: `weight_decay * theta` is added to the gradient before the moments.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

/// Adam with bias correction. Moment buffers are allocated on the first step and
/// matched to parameters by visiting order.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Restores a saved state; `m` and `v` must have matching lengths.
    pub fn from_state(config: AdamConfig, step: u64, m: Vec<Vec<f64>>, v: Vec<Vec<f64>>) -> Result<Self> {
        if m.len() != v.len() || m.iter().zip(&v).any(|(a, b)| a.len() != b.len()) {
            return Err(NnError::ShapeMismatch("adam moment buffers disagree".into()));
        }
        Ok(Self { config, step, m, v })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.v
    }

    /// One update over every parameter of `module`, reading the accumulated gradients.
    pub fn step(&mut self, module: &mut dyn Module) -> Result<()> {
        let mut sizes = Vec::new();
        module.visit("", &mut |_, slot| {
            if let Slot::Param(p) = slot {
                sizes.push(p.value.numel());
            }
        });
        self.advance(&sizes)?;
        let mut index = 0;
        module.visit("", &mut |_, slot| {
            if let Slot::Param(p) = slot {
                self.update(index, p);
                index += 1;
            }
        });
        Ok(())
    }

    pub fn step_params(&mut self, params: &mut [&mut Param]) -> Result<()> {
        let sizes: Vec<usize> = params.iter().map(|p| p.value.numel()).collect();
        self.advance(&sizes)?;
        for (index, p) in params.iter_mut().enumerate() {
            self.update(index, p);
        }
        Ok(())
    }

    fn advance(&mut self, sizes: &[usize]) -> Result<()> {
        if self.m.is_empty() && self.step == 0 {
            self.m = sizes.iter().map(|&n| vec![0.0; n]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != sizes.len() || self.m.iter().zip(sizes).any(|(m, &n)| m.len() != n) {
            return Err(NnError::ShapeMismatch(
                "parameter set changed since the optimizer was initialized".into(),
            ));
        }
        self.step += 1;
        Ok(())
    }

    fn update(&mut self, index: usize, p: &mut Param) {
        let cfg = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let decay = if p.decay { cfg.weight_decay } else { 0.0 };
        let (m, v) = (&mut self.m[index], &mut self.v[index]);
        let (theta, grad) = p.value.value_and_grad_mut();
        for i in 0..theta.len() {
            let g = grad[i] + decay * theta[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            theta[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}
