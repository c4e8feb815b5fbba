//! Fan-in scaled uniform initializers.

use super::rng::Rng;
use super::tensor::Tensor;

/// He-style uniform: `U(-sqrt(6 / fan_in), +sqrt(6 / fan_in))`, for ReLU paths.
pub fn he_uniform(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Tensor {
    let bound = (6.0 / fan_in.max(1) as f64).sqrt();
    Tensor::from_fn(shape, |_| rng.uniform(-bound, bound))
}

/// Xavier-style uniform: `U(±sqrt(6 / (fan_in + fan_out)))`, for tanh/sigmoid paths.
pub fn xavier_uniform(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut Rng) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
    Tensor::from_fn(shape, |_| rng.uniform(-bound, bound))
}

pub fn uniform(shape: &[usize], bound: f64, rng: &mut Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.uniform(-bound, bound))
}
