use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// Bias-corrected Adam with per-parameter moment buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(learning_rate: f64) -> Self {
        AdamState {
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
            learning_rate,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_EPSILON,
        }
    }

    /// Forget the moments and step count; keeps hyperparameters.
    pub fn reset(&mut self) {
        self.m.clear();
        self.v.clear();
        self.t = 0;
    }

    /// One update over `params` using the gradient stored on each tensor
    /// (a missing gradient counts as zero). Aborts without touching any
    /// parameter if a gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        if self.m.len() != params.len() || params.iter().zip(&self.m).any(|(p, m)| p.len() != m.len()) {
            return Err(Error::shape("adam: parameter list does not match optimizer state"));
        }
        for (idx, p) in params.iter().enumerate() {
            if let Some(g) = p.grad() {
                if let Some(i) = g.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "gradient of parameter #{idx} (shape {:?}) at index {i}: {}",
                        p.shape(),
                        g[i]
                    )));
                }
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let Some(g) = p.grad().map(<[f64]>::to_vec) else {
                continue;
            };
            let data = p.data_mut();
            for i in 0..data.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                data[i] -= self.learning_rate * mhat / (vhat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

/// Free-function form: copies `grads` onto the parameters, then steps.
pub fn adam_step(params: &mut [&mut Tensor], grads: &[&[f64]], state: &mut AdamState) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::shape(format!("{} gradients for {} parameters", grads.len(), params.len())));
    }
    for (p, g) in params.iter_mut().zip(grads) {
        if p.len() != g.len() {
            return Err(Error::shape(format!(
                "gradient of length {} for parameter of shape {:?}",
                g.len(),
                p.shape()
            )));
        }
        p.grad_mut().copy_from_slice(g);
    }
    state.step(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_counts_step() {
        let mut w = Tensor::new(&[2], vec![0.5, -1.5]).unwrap();
        let mut state = AdamState::new(0.1);
        adam_step(&mut [&mut w], &[&[0.0, 0.0]], &mut state).unwrap();
        assert_eq!(w.data(), &[0.5, -1.5]);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m_hat = v_hat = 1 after bias correction: delta = lr / (1 + eps).
        let mut w = Tensor::new(&[1], vec![0.0]).unwrap();
        let mut state = AdamState::new(0.1);
        adam_step(&mut [&mut w], &[&[1.0]], &mut state).unwrap();
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((w.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn descends_a_quadratic() {
        let mut w = Tensor::new(&[1], vec![1.0]).unwrap();
        let mut state = AdamState::new(0.1);
        for _ in 0..100 {
            let g = 2.0 * w.data()[0];
            adam_step(&mut [&mut w], &[&[g]], &mut state).unwrap();
        }
        assert!(w.data()[0].abs() < 0.1, "w = {}", w.data()[0]);
        assert_eq!(state.t, 100);
    }

    #[test]
    fn non_finite_gradient_aborts_untouched() {
        let mut w = Tensor::new(&[2], vec![1.0, 2.0]).unwrap();
        let mut state = AdamState::new(0.1);
        let err = adam_step(&mut [&mut w], &[&[0.1, f64::NAN]], &mut state).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
        assert_eq!(w.data(), &[1.0, 2.0]);
        assert_eq!(state.t, 0);
    }
}
