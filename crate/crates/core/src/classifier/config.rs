use serde::{Deserialize, Serialize};

use crate::coremath::{ConvSpec, Padding};
use crate::corpus::Emotion;
use crate::dsp::{N_FRAMES, N_MELS};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    pub input_hw: (usize, usize),
    pub conv1_kernel: usize,
    pub conv1_filters: usize,
    pub conv2_kernel: usize,
    pub conv2_filters: usize,
    pub conv_stride: usize,
    pub blstm_units: usize,
    pub dense_units: usize,
    pub classes: usize,
    pub lr_init: f64,
    pub lr_decay: f64,
    pub lr_floor: f64,
    pub plateau_patience: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl ClassifierConfig {
    pub fn paper() -> Self {
        ClassifierConfig {
            input_hw: (N_MELS, N_FRAMES),
            conv1_kernel: 7,
            conv1_filters: 32,
            conv2_kernel: 3,
            conv2_filters: 64,
            conv_stride: 2,
            blstm_units: 128,
            dense_units: 128,
            classes: Emotion::COUNT,
            lr_init: 1e-4,
            lr_decay: 0.5,
            lr_floor: 1e-5,
            plateau_patience: 5,
            batch_size: 32,
            max_epochs: 300,
        }
    }

    /// Narrow layers, a 10x larger learning rate (floor scaled with it, so
    /// the schedule still allows four halvings) and a short epoch cap.
    pub fn desk() -> Self {
        ClassifierConfig {
            conv1_filters: 4,
            conv2_filters: 8,
            blstm_units: 16,
            dense_units: 16,
            lr_init: 1e-3,
            lr_floor: 1e-4,
            max_epochs: 40,
            ..Self::paper()
        }
    }

    pub fn conv1_spec(&self) -> ConvSpec {
        ConvSpec::new((self.conv_stride, self.conv_stride), Padding::uniform(self.conv1_kernel / 2))
    }

    pub fn conv2_spec(&self) -> ConvSpec {
        ConvSpec::new((self.conv_stride, self.conv_stride), Padding::uniform(self.conv2_kernel / 2))
    }

    /// `(H, W)` after conv1 and after conv2.
    pub fn conv_shapes(&self) -> Result<[(usize, usize); 2]> {
        let (h, w) = self.input_hw;
        let a = self.conv1_spec().output_hw(h, w, self.conv1_kernel, self.conv1_kernel)?;
        let b = self.conv2_spec().output_hw(a.0, a.1, self.conv2_kernel, self.conv2_kernel)?;
        Ok([a, b])
    }

    /// BLSTM sequence length and per-step feature size.
    pub fn sequence_shape(&self) -> Result<(usize, usize)> {
        let [_, (h, w)] = self.conv_shapes()?;
        Ok((w, h * self.conv2_filters))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.conv1_kernel <= self.conv2_kernel {
            return bad("conv1 kernel must be larger than conv2 kernel");
        }
        if self.classes != Emotion::COUNT {
            return bad("classifier must have 4 classes");
        }
        if [self.conv1_filters, self.conv2_filters, self.blstm_units, self.dense_units, self.batch_size]
            .contains(&0)
        {
            return bad("layer widths and batch size must be positive");
        }
        if !(self.lr_init > 0.0 && self.lr_floor > 0.0 && self.lr_decay > 0.0 && self.lr_decay < 1.0) {
            return bad("need lr_init > 0, lr_floor > 0 and 0 < lr_decay < 1");
        }
        if self.plateau_patience == 0 || self.max_epochs == 0 {
            return bad("patience and max_epochs must be positive");
        }
        self.sequence_shape()?;
        Ok(())
    }
}
