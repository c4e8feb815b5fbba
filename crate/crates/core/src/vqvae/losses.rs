//! The three VQ-VAE loss terms with their gradients kept apart, so the
//! stop-gradient routing is explicit: the codebook term only moves
//! embeddings, the commitment term only moves the encoder output.

use serde::{Deserialize, Serialize};

use crate::coremath::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VqLosses {
    pub recon: f64,
    pub codebook: f64,
    pub commitment: f64,
    pub total: f64,
}

/// Gradient of each term with respect to each of its inputs.
pub struct VqLossGrads {
    /// d recon / d x_hat.
    pub x_hat: Tensor,
    /// d codebook / d z_e: identically zero (z_e is behind a stop-gradient).
    pub codebook_wrt_z_e: Tensor,
    /// d codebook / d e.
    pub codebook_wrt_e: Tensor,
    /// d commitment / d z_e.
    pub commitment_wrt_z_e: Tensor,
    /// d commitment / d e: identically zero.
    pub commitment_wrt_e: Tensor,
}

fn same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!("{what}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// Mean over positions (rows) of the squared distance `||z_e - e||^2`.
fn mean_sq_dist(z_e: &Tensor, e: &Tensor) -> f64 {
    let p = z_e.shape()[0].max(1);
    z_e.data().iter().zip(e.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p as f64
}

/// `x`, `x_hat`: any equal shapes. `z_e`, `e_selected`: `[P, d]`.
pub fn vqvae_losses(
    x: &Tensor,
    x_hat: &Tensor,
    z_e: &Tensor,
    e_selected: &Tensor,
    beta: f64,
) -> Result<(VqLosses, VqLossGrads)> {
    same_shape(x, x_hat, "reconstruction")?;
    same_shape(z_e, e_selected, "latents")?;
    if z_e.rank() != 2 {
        return Err(Error::shape(format!("latents must be [P, d], got {:?}", z_e.shape())));
    }
    let n = x.len().max(1) as f64;
    let recon = x.data().iter().zip(x_hat.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n;
    let dist = mean_sq_dist(z_e, e_selected);
    let losses = VqLosses {
        recon,
        codebook: dist,
        commitment: beta * dist,
        total: recon + dist + beta * dist,
    };
    if !losses.total.is_finite() {
        return Err(Error::NonFinite(format!("vq-vae loss {losses:?}")));
    }
    let p = z_e.shape()[0].max(1) as f64;
    let diff = |scale: f64, a: &Tensor, b: &Tensor| {
        Tensor::from_fn(a.shape(), |i| scale * (a.data()[i] - b.data()[i]))
    };
    let grads = VqLossGrads {
        x_hat: diff(2.0 / n, x_hat, x),
        codebook_wrt_z_e: Tensor::zeros(z_e.shape()),
        codebook_wrt_e: diff(2.0 / p, e_selected, z_e),
        commitment_wrt_z_e: diff(2.0 * beta / p, z_e, e_selected),
        commitment_wrt_e: Tensor::zeros(e_selected.shape()),
    };
    Ok((losses, grads))
}
