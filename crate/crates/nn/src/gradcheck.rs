//! Central finite-difference verification of analytic gradients.
//!
//! The probe loss is `L(y) = sum_i r_i * y_i` with a seeded random `r`, so the
//! upstream gradient fed to `backward` is `r` itself. Every parameter element and
//! every input element is perturbed by `±h`. Errors are reported per tensor as
//! `||analytic - numeric|| / max(||analytic||, ||numeric||)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::module::{Mode, Module, Slot};
use crate::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// (parameter name, relative error)
    pub params: Vec<(String, f64)>,
    pub input: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|(_, e)| *e).fold(self.input, f64::max)
    }

    pub fn worst(&self) -> (&str, f64) {
        self.params
            .iter()
            .map(|(n, e)| (n.as_str(), *e))
            .fold(("input", self.input), |a, b| if b.1 > a.1 { b } else { a })
    }
}

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n) * (a - n))
        .sum::<f64>()
        .sqrt();
    let scale = norm(analytic).max(norm(numeric));
    if scale < 1e-10 {
        diff
    } else {
        diff / scale
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn probe_loss(module: &mut dyn Module, input: &Tensor, mode: Mode, probe: &[f64]) -> Result<f64> {
    let y = module.forward(input, mode)?;
    Ok(y.data().iter().zip(probe).map(|(a, b)| a * b).sum())
}

fn nudge(module: &mut dyn Module, param: usize, elem: usize, delta: f64) {
    let mut idx = 0;
    module.visit("", &mut |_, slot| {
        if let Slot::Param(p) = slot {
            if idx == param {
                p.value.data_mut()[elem] += delta;
            }
            idx += 1;
        }
    });
}

pub fn grad_check(
    module: &mut dyn Module,
    input: &Tensor,
    mode: Mode,
    h: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    grad_check_sampled(module, input, mode, h, seed, None)
}

fn pick(rng: &mut ChaCha8Rng, len: usize, limit: Option<usize>) -> Vec<usize> {
    match limit {
        Some(k) if k < len => {
            let mut idx = rand::seq::index::sample(rng, len, k).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..len).collect(),
    }
}

/// Like [`grad_check`], but compares at most `limit` randomly chosen elements of
/// each parameter tensor and of the input. For networks too large to perturb fully.
pub fn grad_check_sampled(
    module: &mut dyn Module,
    input: &Tensor,
    mode: Mode,
    h: f64,
    seed: u64,
    limit: Option<usize>,
) -> Result<GradCheckReport> {
    let y = module.forward(input, mode)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probe: Vec<f64> = (0..y.numel()).map(|_| rng.random_range(-1.0..1.0)).collect();
    module.zero_grad();
    let dx = module.backward(&Tensor::new(y.shape(), probe.clone())?)?;

    let mut analytic: Vec<(String, Vec<f64>)> = Vec::new();
    module.visit("", &mut |name, slot| {
        if let Slot::Param(p) = slot {
            let g = p.value.grad().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; p.value.numel()]);
            analytic.push((name.to_string(), g));
        }
    });

    let mut params = Vec::with_capacity(analytic.len());
    for (pi, (name, grad)) in analytic.iter().enumerate() {
        let elems = pick(&mut rng, grad.len(), limit);
        let mut numeric = Vec::with_capacity(elems.len());
        for &ei in &elems {
            nudge(module, pi, ei, h);
            let plus = probe_loss(module, input, mode, &probe)?;
            nudge(module, pi, ei, -2.0 * h);
            let minus = probe_loss(module, input, mode, &probe)?;
            nudge(module, pi, ei, h);
            numeric.push((plus - minus) / (2.0 * h));
        }
        let picked: Vec<f64> = elems.iter().map(|&i| grad[i]).collect();
        params.push((name.clone(), relative_error(&picked, &numeric)));
    }

    let mut x = input.clone();
    let elems = pick(&mut rng, x.numel(), limit);
    let mut numeric = Vec::with_capacity(elems.len());
    for &i in &elems {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + h;
        let plus = probe_loss(module, &x, mode, &probe)?;
        x.data_mut()[i] = orig - h;
        let minus = probe_loss(module, &x, mode, &probe)?;
        x.data_mut()[i] = orig;
        numeric.push((plus - minus) / (2.0 * h));
    }
    let picked: Vec<f64> = elems.iter().map(|&i| dx.data()[i]).collect();
    Ok(GradCheckReport {
        params,
        input: relative_error(&picked, &numeric),
    })
}
