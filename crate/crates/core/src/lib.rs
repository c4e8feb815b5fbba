//! Speech emotion annotation toolkit: audio features, a VQ-VAE for discrete
//! speech codes, LLM prompt-based labelling, a CNN-BLSTM-attention classifier
//! and the evaluation protocols around them.

pub mod annotate;
pub mod classifier;
pub mod coremath;
pub mod corpus;
pub mod dsp;
pub mod vqvae;
mod error;

pub use error::{Error, Result};
