use serde::{Deserialize, Serialize};

use super::losses::VqLosses;
use super::model::VqVae;
use super::quantize::LatentCodes;
use crate::coremath::{AdamState, Rng, Tensor};
use crate::dsp::MelSpec;
use crate::error::{Error, Result};

/// Mean batch losses over one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqEpoch {
    pub epoch: usize,
    pub recon: f64,
    pub codebook: f64,
    pub commitment: f64,
    pub total: f64,
}

/// Trains for `model.config.epochs` epochs with shuffled minibatches.
/// `on_epoch` sees each epoch's summary as it finishes.
pub fn train_vqvae(
    model: &mut VqVae,
    mels: &[Tensor],
    rng: &mut Rng,
    mut on_epoch: impl FnMut(&VqEpoch),
) -> Result<Vec<VqEpoch>> {
    if mels.is_empty() {
        return Err(Error::Empty("vq-vae training set".into()));
    }
    let cfg = model.config.clone();
    let mut adam = AdamState::new(cfg.learning_rate);
    let mut order: Vec<usize> = (0..mels.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut sum = VqLosses::default();
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Tensor> = chunk.iter().map(|&i| &mels[i]).collect();
            let l = model.train_step(&batch, &mut adam)?;
            sum.recon += l.recon;
            sum.codebook += l.codebook;
            sum.commitment += l.commitment;
            sum.total += l.total;
            batches += 1;
        }
        let b = batches as f64;
        let e = VqEpoch {
            epoch,
            recon: sum.recon / b,
            codebook: sum.codebook / b,
            commitment: sum.commitment / b,
            total: sum.total / b,
        };
        on_epoch(&e);
        history.push(e);
    }
    Ok(history)
}

/// Losses of `model` on `mels` without updating anything, averaged per item.
pub fn evaluate_vqvae(model: &VqVae, mels: &[Tensor]) -> Result<VqLosses> {
    if mels.is_empty() {
        return Err(Error::Empty("vq-vae evaluation set".into()));
    }
    let mut sum = VqLosses::default();
    for m in mels {
        let l = model.losses(&[m])?;
        sum.recon += l.recon;
        sum.codebook += l.codebook;
        sum.commitment += l.commitment;
        sum.total += l.total;
    }
    let n = mels.len() as f64;
    Ok(VqLosses {
        recon: sum.recon / n,
        codebook: sum.codebook / n,
        commitment: sum.commitment / n,
        total: sum.total / n,
    })
}

/// One line of a codes file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodesRecord {
    pub utterance_id: String,
    pub codes: LatentCodes,
}

/// Codes for each `(utterance_id, mel)` pair, in input order.
pub fn extract_codes<'a>(
    model: &VqVae,
    items: impl IntoIterator<Item = (&'a str, &'a MelSpec)>,
) -> Result<Vec<CodesRecord>> {
    items
        .into_iter()
        .map(|(id, mel)| {
            Ok(CodesRecord {
                utterance_id: id.to_string(),
                codes: model.codes(mel)?,
            })
        })
        .collect()
}
