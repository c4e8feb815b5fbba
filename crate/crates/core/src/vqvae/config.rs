use serde::{Deserialize, Serialize};

use crate::coremath::{ConvSpec, Padding};
use crate::dsp::{N_FRAMES, N_MELS};
use crate::error::{Error, Result};

/// Latent positions per utterance for an 80 x 256 input.
pub const LATENT_POSITIONS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VqVaeConfig {
    pub codebook_size: usize,
    pub code_dim: usize,
    /// Channels after each encoder layer except the last, which has `code_dim`.
    pub channels: Vec<usize>,
    /// Per-layer (H, W) strides; one more entry than `channels`.
    pub strides: Vec<(usize, usize)>,
    /// Per-layer (H, W) kernel sizes. An axis whose kernel equals its stride
    /// is unpadded; other axes are padded by `kernel / 2` on both sides.
    pub kernels: Vec<(usize, usize)>,
    pub input_hw: (usize, usize),
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta: f64,
}

impl Default for VqVaeConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl VqVaeConfig {
    const STRIDES: [(usize, usize); 5] = [(2, 2), (2, 2), (2, 1), (2, 1), (5, 1)];
    // The last layer spans the 5 remaining frequency rows; a 3-row kernel at
    // stride 5 would never see two of them.
    const KERNELS: [(usize, usize); 5] = [(3, 3), (3, 3), (3, 3), (3, 3), (5, 3)];

    /// 8192 x 512 codebook, batch 256, 1000 epochs at 1e-4.
    pub fn paper() -> Self {
        VqVaeConfig {
            codebook_size: 8192,
            code_dim: 512,
            channels: vec![64, 128, 256, 256],
            strides: Self::STRIDES.to_vec(),
            kernels: Self::KERNELS.to_vec(),
            input_hw: (N_MELS, N_FRAMES),
            batch_size: 256,
            epochs: 1000,
            learning_rate: 1e-4,
            beta: 0.25,
        }
    }

    /// Small enough to train in seconds on one core.
    pub fn desk() -> Self {
        VqVaeConfig {
            codebook_size: 256,
            code_dim: 64,
            channels: vec![4, 8, 8, 16],
            batch_size: 4,
            epochs: 50,
            learning_rate: 2e-3,
            ..Self::paper()
        }
    }

    pub fn layer_spec(&self, layer: usize) -> ConvSpec {
        let (sh, sw) = self.strides[layer];
        let (kh, kw) = self.kernels[layer];
        let pad = |k: usize, s: usize| if k == s { 0 } else { k / 2 };
        let (ph, pw) = (pad(kh, sh), pad(kw, sw));
        ConvSpec::new(
            (sh, sw),
            Padding {
                top: ph,
                bottom: ph,
                left: pw,
                right: pw,
            },
        )
    }

    /// Channel count entering each encoder layer, plus the output count.
    pub fn channel_chain(&self) -> Vec<usize> {
        let mut c = vec![1];
        c.extend(&self.channels);
        c.push(self.code_dim);
        c
    }

    /// Spatial size entering each encoder layer, plus the latent grid.
    pub fn shape_chain(&self) -> Result<Vec<(usize, usize)>> {
        let mut hw = vec![self.input_hw];
        for l in 0..self.strides.len() {
            let (h, w) = *hw.last().unwrap();
            let (kh, kw) = self.kernels[l];
            hw.push(self.layer_spec(l).output_hw(h, w, kh, kw)?);
        }
        Ok(hw)
    }

    pub fn latent_hw(&self) -> Result<(usize, usize)> {
        Ok(*self.shape_chain()?.last().unwrap())
    }

    pub fn positions(&self) -> Result<usize> {
        let (h, w) = self.latent_hw()?;
        Ok(h * w)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.codebook_size == 0 || self.code_dim == 0 {
            return bad(format!(
                "codebook_size and code_dim must be positive (k={}, d={})",
                self.codebook_size, self.code_dim
            ));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be >= 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.strides.len() != self.channels.len() + 1
            || self.kernels.len() != self.strides.len()
            || self.channels.contains(&0)
        {
            return bad("need one stride and kernel per layer and non-zero channels".into());
        }
        let positions = self.positions()?;
        if self.input_hw == (N_MELS, N_FRAMES) && positions != LATENT_POSITIONS {
            return bad(format!(
                "encoder yields {positions} latent positions, need {LATENT_POSITIONS}"
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_stack_reaches_one_by_sixty_four() {
        let c = VqVaeConfig::paper();
        assert_eq!(
            c.shape_chain().unwrap(),
            vec![(80, 256), (40, 128), (20, 64), (10, 64), (5, 64), (1, 64)]
        );
        c.validate().unwrap();
        VqVaeConfig::desk().validate().unwrap();
    }

    #[test]
    fn zero_codebook_is_rejected() {
        let c = VqVaeConfig {
            codebook_size: 0,
            ..VqVaeConfig::desk()
        };
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
    }
}
