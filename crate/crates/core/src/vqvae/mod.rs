//! VQ-VAE over 80 x 256 log-mel spectrograms: a strided conv encoder to a
//! 1 x 64 latent grid, nearest-embedding quantization, and a mirrored
//! transpose-conv decoder. The quantized grid gives 64 codes per utterance.

mod config;
mod losses;
mod model;
mod quantize;
mod train;

pub use config::{VqVaeConfig, LATENT_POSITIONS};
pub use losses::{vqvae_losses, VqLossGrads, VqLosses};
pub use model::{grid_to_rows, rows_to_grid, ConvLayer, QuantizerGrads, VqForward, VqVae};
pub use quantize::{nearest, quantize, Codebook, LatentCodes};
pub use train::{evaluate_vqvae, extract_codes, train_vqvae, CodesRecord, VqEpoch};
