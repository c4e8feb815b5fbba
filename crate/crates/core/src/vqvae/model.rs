use serde::{Deserialize, Serialize};

use super::config::VqVaeConfig;
use super::losses::{vqvae_losses, VqLosses};
use super::quantize::{quantize, Codebook, LatentCodes};
use crate::coremath::{
    conv2d_backward, conv2d_cached, conv2d_transpose, conv2d_transpose_backward, init, param_digest,
    relu_backward_in_place, relu_in_place, AdamState, Checkpoint, ConvCache, Rng, Tensor,
};
use crate::dsp::MelSpec;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    pub kernels: Tensor,
    pub bias: Tensor,
}

/// Encoder (convs), decoder (transpose convs mirroring the encoder) and the
/// codebook. ReLU between layers; both stacks end linear.
#[derive(Clone, Debug, PartialEq)]
pub struct VqVae {
    pub config: VqVaeConfig,
    pub encoder: Vec<ConvLayer>,
    pub decoder: Vec<ConvLayer>,
    pub codebook: Tensor,
}

/// Everything the backward pass needs from one forward pass.
pub struct VqForward {
    /// Input to each encoder layer, then the encoder output `[N, d, h, w]`.
    enc_acts: Vec<Tensor>,
    enc_caches: Vec<ConvCache>,
    /// Input to each decoder layer (the first is z_q), then the output.
    dec_acts: Vec<Tensor>,
    pub z_e: Tensor,
    pub z_q: Tensor,
    pub codes: Vec<usize>,
}

impl VqForward {
    pub fn x_hat(&self) -> &Tensor {
        self.dec_acts.last().unwrap()
    }
}

/// Gradients arriving at the quantizer, exposed for straight-through checks.
pub struct QuantizerGrads {
    /// Reconstruction gradient at z_q, `[P, d]`.
    pub at_z_q: Tensor,
    /// Reconstruction gradient delivered to z_e, `[P, d]`.
    pub recon_at_z_e: Tensor,
    /// Codebook-term gradient at z_e (stop-gradient: zero).
    pub codebook_at_z_e: Tensor,
    /// Commitment-term gradient at the embeddings (stop-gradient: zero).
    pub commitment_at_e: Tensor,
}

/// `[N, d, h, w]` to `[N*h*w, d]`.
pub fn grid_to_rows(t: &Tensor) -> Tensor {
    let (n, d, h, w) = (t.shape()[0], t.shape()[1], t.shape()[2], t.shape()[3]);
    let hw = h * w;
    let mut out = vec![0.0; t.len()];
    for s in 0..n {
        for c in 0..d {
            for p in 0..hw {
                out[(s * hw + p) * d + c] = t.data()[(s * d + c) * hw + p];
            }
        }
    }
    Tensor::new(&[n * hw, d], out).expect("same length")
}

/// Inverse of [`grid_to_rows`].
pub fn rows_to_grid(t: &Tensor, n: usize, h: usize, w: usize) -> Tensor {
    let d = t.shape()[1];
    let hw = h * w;
    let mut out = vec![0.0; t.len()];
    for s in 0..n {
        for c in 0..d {
            for p in 0..hw {
                out[(s * d + c) * hw + p] = t.data()[(s * hw + p) * d + c];
            }
        }
    }
    Tensor::new(&[n, d, h, w], out).expect("same length")
}

fn batch_tensor(mels: &[&Tensor], hw: (usize, usize)) -> Result<Tensor> {
    if mels.is_empty() {
        return Err(Error::Empty("batch".into()));
    }
    let mut data = Vec::with_capacity(mels.len() * hw.0 * hw.1);
    for m in mels {
        m.expect_shape("vq-vae input", &[hw.0, hw.1])?;
        data.extend_from_slice(m.data());
    }
    Tensor::new(&[mels.len(), 1, hw.0, hw.1], data)
}

impl VqVae {
    /// Random init: He uniform for layers followed by ReLU, Xavier for the two
    /// linear ends, codebook uniform in `(-1/k, 1/k)`.
    pub fn new(config: VqVaeConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let ch = config.channel_chain();
        let layers = ch.len() - 1;
        let mut encoder = Vec::with_capacity(layers);
        for l in 0..layers {
            let (cin, cout) = (ch[l], ch[l + 1]);
            let (kh, kw) = config.kernels[l];
            let area = kh * kw;
            let shape = [cout, cin, kh, kw];
            let kernels = if l + 1 < layers {
                init::he_uniform(&shape, cin * area, rng)
            } else {
                init::xavier_uniform(&shape, cin * area, cout * area, rng)
            };
            encoder.push(ConvLayer {
                kernels,
                bias: Tensor::zeros(&[cout]),
            });
        }
        let mut decoder = Vec::with_capacity(layers);
        for j in 0..layers {
            let l = layers - 1 - j;
            let (cin, cout) = (ch[l + 1], ch[l]);
            let (kh, kw) = config.kernels[l];
            let area = kh * kw;
            let shape = [cin, cout, kh, kw];
            let kernels = if j + 1 < layers {
                init::he_uniform(&shape, cin * area, rng)
            } else {
                init::xavier_uniform(&shape, cin * area, cout * area, rng)
            };
            decoder.push(ConvLayer {
                kernels,
                bias: Tensor::zeros(&[cout]),
            });
        }
        let k = config.codebook_size;
        let codebook = init::uniform(&[k, config.code_dim], 1.0 / k as f64, rng);
        Ok(VqVae {
            config,
            encoder,
            decoder,
            codebook,
        })
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut v = Vec::new();
        for l in self.encoder.iter().chain(&self.decoder) {
            v.push(&l.kernels);
            v.push(&l.bias);
        }
        v.push(&self.codebook);
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = Vec::new();
        for l in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            v.push(&mut l.kernels);
            v.push(&mut l.bias);
        }
        v.push(&mut self.codebook);
        v
    }

    pub fn digest(&self) -> String {
        param_digest(self.params())
    }

    pub fn codebook(&self) -> Result<Codebook> {
        Codebook::new(self.codebook.clone())
    }

    /// Encoder output for a batch `[N, 1, H, W]`, keeping activations.
    fn encode_batch(&self, x: &Tensor) -> Result<(Vec<Tensor>, Vec<ConvCache>)> {
        let mut acts = vec![x.clone()];
        let mut caches = Vec::with_capacity(self.encoder.len());
        for (l, layer) in self.encoder.iter().enumerate() {
            let (mut out, cache) =
                conv2d_cached(acts.last().unwrap(), &layer.kernels, Some(&layer.bias), self.config.layer_spec(l))?;
            if l + 1 < self.encoder.len() {
                relu_in_place(&mut out);
            }
            acts.push(out);
            caches.push(cache);
        }
        Ok((acts, caches))
    }

    /// Decoder output for a `[N, d, h, w]` latent grid, keeping activations.
    fn decode_batch(&self, z_q: Tensor) -> Result<Vec<Tensor>> {
        let shapes = self.config.shape_chain()?;
        let layers = self.decoder.len();
        let mut acts = vec![z_q];
        for (j, layer) in self.decoder.iter().enumerate() {
            let l = layers - 1 - j;
            let mut out = conv2d_transpose(
                acts.last().unwrap(),
                &layer.kernels,
                Some(&layer.bias),
                self.config.layer_spec(l),
                shapes[l],
            )?;
            if j + 1 < layers {
                relu_in_place(&mut out);
            }
            acts.push(out);
        }
        Ok(acts)
    }

    /// Continuous latents `[64, d]` (rows = positions) for one spectrogram.
    pub fn encode(&self, mel: &Tensor) -> Result<Tensor> {
        let x = batch_tensor(&[mel], self.config.input_hw)?;
        let (acts, _) = self.encode_batch(&x)?;
        Ok(grid_to_rows(acts.last().unwrap()))
    }

    /// Reconstruction from `[P, d]` quantized latents of one utterance.
    pub fn decode(&self, z_q: &Tensor) -> Result<Tensor> {
        let (h, w) = self.config.latent_hw()?;
        z_q.expect_shape("z_q", &[h * w, self.config.code_dim])?;
        let acts = self.decode_batch(rows_to_grid(z_q, 1, h, w))?;
        let (ih, iw) = self.config.input_hw;
        acts.last().unwrap().clone().reshape(&[ih, iw])
    }

    pub fn codes(&self, mel: &MelSpec) -> Result<LatentCodes> {
        let z_e = self.encode(mel.tensor())?;
        let (_, codes) = quantize(&z_e, &self.codebook()?)?;
        LatentCodes::new(
            codes.into_iter().map(|c| c as u32).collect(),
            self.config.positions()?,
            self.config.codebook_size,
        )
    }

    pub fn forward(&self, batch: &[&Tensor]) -> Result<VqForward> {
        let x = batch_tensor(batch, self.config.input_hw)?;
        let (enc_acts, enc_caches) = self.encode_batch(&x)?;
        let grid = enc_acts.last().unwrap();
        let (n, h, w) = (grid.shape()[0], grid.shape()[2], grid.shape()[3]);
        let z_e = grid_to_rows(grid);
        let (z_q, codes) = quantize(&z_e, &self.codebook()?)?;
        let dec_acts = self.decode_batch(rows_to_grid(&z_q, n, h, w))?;
        Ok(VqForward {
            enc_acts,
            enc_caches,
            dec_acts,
            z_e,
            z_q,
            codes,
        })
    }

    pub fn losses(&self, batch: &[&Tensor]) -> Result<VqLosses> {
        let fwd = self.forward(batch)?;
        let x = &fwd.enc_acts[0];
        Ok(vqvae_losses(x, fwd.x_hat(), &fwd.z_e, &fwd.z_q, self.config.beta)?.0)
    }

    /// Forward and backward for one batch. Parameter gradients accumulate in
    /// the parameters' grad buffers; the quantizer is treated as identity on
    /// the reconstruction path.
    pub fn backward(&mut self, batch: &[&Tensor]) -> Result<(VqLosses, QuantizerGrads)> {
        let fwd = self.forward(batch)?;
        let x = &fwd.enc_acts[0];
        let (losses, lg) = vqvae_losses(x, fwd.x_hat(), &fwd.z_e, &fwd.z_q, self.config.beta)?;

        // Decoder.
        let layers = self.decoder.len();
        let mut grad = lg.x_hat.clone();
        for j in (0..layers).rev() {
            let l = layers - 1 - j;
            if j + 1 < layers {
                relu_backward_in_place(&fwd.dec_acts[j + 1], &mut grad);
            }
            let layer = &mut self.decoder[j];
            let g = conv2d_transpose_backward(&fwd.dec_acts[j], &layer.kernels, self.config.layer_spec(l), &grad)?;
            accumulate(&mut layer.kernels, g.kernels.data());
            accumulate(&mut layer.bias, &g.bias);
            grad = g.input;
        }
        let at_z_q = grid_to_rows(&grad);

        // Straight-through: the reconstruction gradient passes z_q -> z_e as is.
        let recon_at_z_e = at_z_q.clone();
        let mut at_z_e = recon_at_z_e.clone();
        for ((a, c), b) in at_z_e
            .data_mut()
            .iter_mut()
            .zip(lg.commitment_wrt_z_e.data())
            .zip(lg.codebook_wrt_z_e.data())
        {
            *a += c + b;
        }

        // Codebook: only the codebook term reaches the embeddings.
        let d = self.config.code_dim;
        let gcb = self.codebook.grad_mut();
        for (p, &code) in fwd.codes.iter().enumerate() {
            let src = &lg.codebook_wrt_e.data()[p * d..(p + 1) * d];
            let zero = &lg.commitment_wrt_e.data()[p * d..(p + 1) * d];
            for ((g, a), b) in gcb[code * d..(code + 1) * d].iter_mut().zip(src).zip(zero) {
                *g += a + b;
            }
        }

        // Encoder.
        let grid = fwd.enc_acts.last().unwrap();
        let mut grad = rows_to_grid(&at_z_e, grid.shape()[0], grid.shape()[2], grid.shape()[3]);
        for l in (0..self.encoder.len()).rev() {
            if l + 1 < self.encoder.len() {
                relu_backward_in_place(&fwd.enc_acts[l + 1], &mut grad);
            }
            let layer = &mut self.encoder[l];
            let g = conv2d_backward(
                &fwd.enc_acts[l],
                &layer.kernels,
                self.config.layer_spec(l),
                Some(&fwd.enc_caches[l]),
                &grad,
            )?;
            accumulate(&mut layer.kernels, g.kernels.data());
            accumulate(&mut layer.bias, &g.bias);
            grad = g.input;
        }
        Ok((
            losses,
            QuantizerGrads {
                at_z_q,
                recon_at_z_e,
                codebook_at_z_e: lg.codebook_wrt_z_e,
                commitment_at_e: lg.commitment_wrt_e,
            },
        ))
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// One optimisation step on `batch`; returns the pre-step losses.
    pub fn train_step(&mut self, batch: &[&Tensor], adam: &mut AdamState) -> Result<VqLosses> {
        self.zero_grad();
        let (losses, _) = self.backward(batch)?;
        adam.step(&mut self.params_mut())?;
        Ok(losses)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let meta = serde_json::to_string(&CheckpointMeta {
            kind: "vqvae".into(),
            config: self.config.clone(),
        })
        .expect("config serializes");
        let mut ck = Checkpoint::new(meta);
        for (i, l) in self.encoder.iter().enumerate() {
            ck.push(format!("encoder.{i}.kernels"), &l.kernels);
            ck.push(format!("encoder.{i}.bias"), &l.bias);
        }
        for (i, l) in self.decoder.iter().enumerate() {
            ck.push(format!("decoder.{i}.kernels"), &l.kernels);
            ck.push(format!("decoder.{i}.bias"), &l.bias);
        }
        ck.push("codebook", &self.codebook);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let meta: CheckpointMeta =
            serde_json::from_str(&ck.metadata).map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
        if meta.kind != "vqvae" {
            return Err(Error::Checkpoint(format!("expected a vqvae checkpoint, got {}", meta.kind)));
        }
        let mut model = VqVae::new(meta.config, &mut Rng::new(0))?;
        let load = |name: String, into: &mut Tensor| -> Result<()> {
            let t = ck.get(&name)?;
            if t.shape() != into.shape() {
                return Err(Error::Checkpoint(format!(
                    "{name}: shape {:?} does not match config {:?}",
                    t.shape(),
                    into.shape()
                )));
            }
            *into = t.clone();
            Ok(())
        };
        for (i, l) in model.encoder.iter_mut().enumerate() {
            load(format!("encoder.{i}.kernels"), &mut l.kernels)?;
            load(format!("encoder.{i}.bias"), &mut l.bias)?;
        }
        for (i, l) in model.decoder.iter_mut().enumerate() {
            load(format!("decoder.{i}.kernels"), &mut l.kernels)?;
            load(format!("decoder.{i}.bias"), &mut l.bias)?;
        }
        load("codebook".into(), &mut model.codebook)?;
        Ok(model)
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    kind: String,
    config: VqVaeConfig,
}

fn accumulate(t: &mut Tensor, g: &[f64]) {
    for (a, b) in t.grad_mut().iter_mut().zip(g) {
        *a += b;
    }
}
