//! Attention pooling over BLSTM outputs: `alpha = softmax(H w)`,
//! `R = sum_i alpha_i h_i`.

use crate::coremath::{softmax, Tensor};
use crate::error::{Error, Result};

fn rows(h: &Tensor) -> Result<(usize, usize)> {
    match *h.shape() {
        [t, d] if t > 0 => Ok((t, d)),
        [0, _] => Err(Error::EmptySequence),
        _ => Err(Error::shape(format!("attention input must be [T, D], got {:?}", h.shape()))),
    }
}

/// Max-stabilized softmax of `h_i . w` over timesteps.
pub fn attention_weights(h: &Tensor, w: &[f64]) -> Result<Vec<f64>> {
    let (_, d) = rows(h)?;
    if w.len() != d {
        return Err(Error::shape(format!("attention vector has {} entries, H has {d} columns", w.len())));
    }
    let scores: Vec<f64> = h.data().chunks(d).map(|r| r.iter().zip(w).map(|(a, b)| a * b).sum()).collect();
    Ok(softmax(&scores))
}

/// Weighted sum of the rows of `h`.
pub fn attention_pool(h: &Tensor, alpha: &[f64]) -> Result<Vec<f64>> {
    let (t, d) = rows(h)?;
    if alpha.len() != t {
        return Err(Error::shape(format!("{} weights for {t} timesteps", alpha.len())));
    }
    let mut r = vec![0.0; d];
    for (row, a) in h.data().chunks(d).zip(alpha) {
        for (acc, v) in r.iter_mut().zip(row) {
            *acc += a * v;
        }
    }
    Ok(r)
}

/// Gradients of `R` with respect to `H` and `w`, given `dR`.
pub fn attention_backward(h: &Tensor, w: &[f64], alpha: &[f64], grad_r: &[f64]) -> Result<(Tensor, Vec<f64>)> {
    let (t, d) = rows(h)?;
    if grad_r.len() != d || alpha.len() != t || w.len() != d {
        return Err(Error::shape("attention backward: inconsistent lengths"));
    }
    // d alpha_i = h_i . dR; d score_i = alpha_i (d alpha_i - sum_j alpha_j d alpha_j).
    let da: Vec<f64> = h.data().chunks(d).map(|r| r.iter().zip(grad_r).map(|(a, b)| a * b).sum()).collect();
    let mean: f64 = alpha.iter().zip(&da).map(|(a, g)| a * g).sum();
    let ds: Vec<f64> = alpha.iter().zip(&da).map(|(a, g)| a * (g - mean)).collect();
    let mut dh = vec![0.0; t * d];
    let mut dw = vec![0.0; d];
    for i in 0..t {
        let row = &h.data()[i * d..(i + 1) * d];
        for j in 0..d {
            dh[i * d + j] = alpha[i] * grad_r[j] + ds[i] * w[j];
            dw[j] += ds[i] * row[j];
        }
    }
    Ok((Tensor::new(&[t, d], dh)?, dw))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_rows_get_uniform_weights() {
        let h = Tensor::new(&[4, 2], [1.0, -2.0].repeat(4)).unwrap();
        let a = attention_weights(&h, &[0.3, 0.7]).unwrap();
        assert!(a.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn two_step_example() {
        let h = Tensor::new(&[2, 1], vec![2f64.ln(), 0.0]).unwrap();
        let a = attention_weights(&h, &[1.0]).unwrap();
        assert!((a[0] - 2.0 / 3.0).abs() < 1e-12 && (a[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn pooling_examples() {
        let h = Tensor::new(&[2, 2], vec![3.0, 0.0, 0.0, 3.0]).unwrap();
        let r = attention_pool(&h, &[2.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!((r[0] - 2.0).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12);
        assert_eq!(attention_pool(&h, &[0.0, 1.0]).unwrap(), vec![0.0, 3.0]);
        assert_eq!(attention_pool(&h, &[0.5, 0.5]).unwrap(), vec![1.5, 1.5]);
        assert!(attention_pool(&h, &[1.0]).is_err());
    }
}
