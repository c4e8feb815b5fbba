use super::gemm::gemm;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

/// Element-wise ReLU. The derivative at exactly zero is taken as zero.
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub fn relu_in_place(t: &mut Tensor) {
    t.data_mut().iter_mut().for_each(|v| *v = relu(*v));
}

/// Masks `grad` by the ReLU derivative evaluated at the layer output.
pub fn relu_backward_in_place(output: &Tensor, grad: &mut Tensor) {
    for (g, &y) in grad.data_mut().iter_mut().zip(output.data()) {
        if y <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Affine layer over the last axis: `[.., D] x [D, K] + [K]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub weights: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

pub struct DenseCache {
    output: Tensor,
}

fn split_leading(input: &Tensor, d: usize) -> Result<usize> {
    match input.shape().last() {
        Some(&last) if last == d => Ok(input.len() / d.max(1)),
        _ => Err(Error::shape(format!(
            "dense input: inner dim must be {d}, got shape {:?}",
            input.shape()
        ))),
    }
}

impl Dense {
    pub fn zeros(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        Dense {
            weights: Tensor::zeros(&[input_dim, output_dim]),
            bias: Tensor::zeros(&[output_dim]),
            activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn output_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, DenseCache)> {
        let out = dense(input, &self.weights, &self.bias, self.activation)?;
        Ok((out.clone(), DenseCache { output: out }))
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    pub fn backward(&mut self, input: &Tensor, cache: &DenseCache, grad_out: &Tensor) -> Result<Tensor> {
        let (d, k) = (self.input_dim(), self.output_dim());
        let rows = split_leading(input, d)?;
        grad_out.expect_shape("dense grad", cache.output.shape())?;
        let mut g = grad_out.clone();
        if self.activation == Activation::Relu {
            relu_backward_in_place(&cache.output, &mut g);
        }
        gemm(d, rows, k, 1.0, input.data(), true, g.data(), false, 1.0, self.weights.grad_mut());
        let gb = self.bias.grad_mut();
        for row in g.data().chunks(k) {
            for (b, v) in gb.iter_mut().zip(row) {
                *b += v;
            }
        }
        let mut dx = vec![0.0; rows * d];
        gemm(rows, k, d, 1.0, g.data(), false, self.weights.data(), true, 0.0, &mut dx);
        Tensor::new(input.shape(), dx)
    }

    pub fn params_mut(&mut self) -> [&mut Tensor; 2] {
        [&mut self.weights, &mut self.bias]
    }

    pub fn params(&self) -> [&Tensor; 2] {
        [&self.weights, &self.bias]
    }
}

/// Affine map plus optional ReLU over the last axis.
pub fn dense(input: &Tensor, weights: &Tensor, bias: &Tensor, activation: Activation) -> Result<Tensor> {
    let (d, k) = match *weights.shape() {
        [d, k] => (d, k),
        _ => return Err(Error::shape(format!("dense weights must be [D, K], got {:?}", weights.shape()))),
    };
    bias.expect_shape("dense bias", &[k])?;
    let rows = split_leading(input, d)?;
    let mut out = vec![0.0; rows * k];
    for row in out.chunks_mut(k) {
        row.copy_from_slice(bias.data());
    }
    gemm(rows, d, k, 1.0, input.data(), false, weights.data(), false, 1.0, &mut out);
    let mut shape = input.shape().to_vec();
    *shape.last_mut().expect("rank >= 1") = k;
    let mut t = Tensor::new(&shape, out)?;
    if activation == Activation::Relu {
        relu_in_place(&mut t);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights_pass_input_through() {
        let mut w = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            w.data_mut()[i * 3 + i] = 1.0;
        }
        let x = Tensor::from_fn(&[2, 3], |i| i as f64 - 2.5);
        let y = dense(&x, &w, &Tensor::zeros(&[3]), Activation::None).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn relu_definition() {
        assert_eq!(relu(-1.0), 0.0);
        assert_eq!(relu(2.0), 2.0);
        assert_eq!(relu(0.0), 0.0);
    }

    #[test]
    fn inner_dim_mismatch() {
        let x = Tensor::zeros(&[2, 4]);
        let err = dense(&x, &Tensor::zeros(&[3, 2]), &Tensor::zeros(&[2]), Activation::None).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }
}
