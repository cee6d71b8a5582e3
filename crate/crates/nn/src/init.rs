use rand::Rng;

use crate::tensor::Tensor;

/// Uniform on ±sqrt(6 / fan_in), the fan-in Kaiming bound for ReLU networks.
pub fn kaiming_uniform<R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
    let numel: usize = shape.iter().product();
    let data = (0..numel).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::new(shape, data).expect("numel matches shape")
}

pub const KAIMING_UNIFORM_FAN_IN: &str = "kaiming-uniform-fan-in";
