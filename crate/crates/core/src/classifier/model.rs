use serde::{Deserialize, Serialize};

use super::attention::{attention_backward, attention_pool, attention_weights};
use super::config::ClassifierConfig;
use crate::coremath::{
    conv2d_backward, conv2d_cached, init, param_digest, relu_backward_in_place, relu_in_place, softmax,
    softmax_cross_entropy, Activation, BiLstm, BiLstmCache, Checkpoint, ConvCache, Dense, DenseCache, Rng, Tensor,
};
use crate::error::{Error, Result};

/// conv(7x7) -> conv(3x3) -> BLSTM over time -> attention -> dense -> logits.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    pub config: ClassifierConfig,
    pub conv1_kernels: Tensor,
    pub conv1_bias: Tensor,
    pub conv2_kernels: Tensor,
    pub conv2_bias: Tensor,
    pub blstm: BiLstm,
    /// Attention scoring vector, `[2U]`.
    pub attention: Tensor,
    pub hidden: Dense,
    pub output: Dense,
}

struct Trace {
    x: Tensor,
    c1: Tensor,
    c1_cache: ConvCache,
    c2: Tensor,
    c2_cache: ConvCache,
    seq: Tensor,
    h: Tensor,
    h_cache: BiLstmCache,
    alpha: Vec<f64>,
    pooled: Tensor,
    d1: Tensor,
    d1_cache: DenseCache,
    d2_cache: DenseCache,
    logits: Tensor,
}

/// `[1, C, H, W]` conv output to a `[W, C*H]` time-major sequence.
fn to_sequence(t: &Tensor) -> Tensor {
    let (c, h, w) = (t.shape()[1], t.shape()[2], t.shape()[3]);
    let f = c * h;
    let mut out = vec![0.0; w * f];
    for ci in 0..c {
        for hi in 0..h {
            for wi in 0..w {
                out[wi * f + ci * h + hi] = t.data()[(ci * h + hi) * w + wi];
            }
        }
    }
    Tensor::new(&[w, f], out).expect("same length")
}

fn from_sequence(seq: &Tensor, c: usize, h: usize, w: usize) -> Tensor {
    let f = c * h;
    let mut out = vec![0.0; c * h * w];
    for ci in 0..c {
        for hi in 0..h {
            for wi in 0..w {
                out[(ci * h + hi) * w + wi] = seq.data()[wi * f + ci * h + hi];
            }
        }
    }
    Tensor::new(&[1, c, h, w], out).expect("same length")
}

fn accumulate(t: &mut Tensor, g: &[f64], scale: f64) {
    for (a, b) in t.grad_mut().iter_mut().zip(g) {
        *a += scale * b;
    }
}

impl Classifier {
    /// He uniform on the ReLU layers, Xavier on the LSTM, attention and
    /// output layers; zero biases.
    pub fn new(config: ClassifierConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let (k1, f1, k2, f2) = (config.conv1_kernel, config.conv1_filters, config.conv2_kernel, config.conv2_filters);
        let (_, feat) = config.sequence_shape()?;
        let u = config.blstm_units;
        let mut blstm = BiLstm::zeros(feat, u);
        for dir in [&mut blstm.forward, &mut blstm.backward] {
            dir.w_ih = init::xavier_uniform(&[4 * u, feat], feat, u, rng);
            dir.w_hh = init::xavier_uniform(&[4 * u, u], u, u, rng);
        }
        let mut hidden = Dense::zeros(2 * u, config.dense_units, Activation::Relu);
        hidden.weights = init::he_uniform(&[2 * u, config.dense_units], 2 * u, rng);
        let mut output = Dense::zeros(config.dense_units, config.classes, Activation::None);
        output.weights = init::xavier_uniform(
            &[config.dense_units, config.classes],
            config.dense_units,
            config.classes,
            rng,
        );
        Ok(Classifier {
            conv1_kernels: init::he_uniform(&[f1, 1, k1, k1], k1 * k1, rng),
            conv1_bias: Tensor::zeros(&[f1]),
            conv2_kernels: init::he_uniform(&[f2, f1, k2, k2], f1 * k2 * k2, rng),
            conv2_bias: Tensor::zeros(&[f2]),
            blstm,
            attention: init::xavier_uniform(&[2 * u], 2 * u, 1, rng),
            hidden,
            output,
            config,
        })
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut v = vec![&self.conv1_kernels, &self.conv1_bias, &self.conv2_kernels, &self.conv2_bias];
        v.extend(self.blstm.params());
        v.push(&self.attention);
        v.extend(self.hidden.params());
        v.extend(self.output.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = vec![
            &mut self.conv1_kernels,
            &mut self.conv1_bias,
            &mut self.conv2_kernels,
            &mut self.conv2_bias,
        ];
        v.extend(self.blstm.params_mut());
        v.push(&mut self.attention);
        v.extend(self.hidden.params_mut());
        v.extend(self.output.params_mut());
        v
    }

    pub fn digest(&self) -> String {
        param_digest(self.params())
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn trace(&self, mel: &Tensor) -> Result<Trace> {
        let (ih, iw) = self.config.input_hw;
        mel.expect_shape("classifier input", &[ih, iw])?;
        let x = mel.clone().reshape(&[1, 1, ih, iw])?;
        let (mut c1, c1_cache) = conv2d_cached(&x, &self.conv1_kernels, Some(&self.conv1_bias), self.config.conv1_spec())?;
        relu_in_place(&mut c1);
        let (mut c2, c2_cache) = conv2d_cached(&c1, &self.conv2_kernels, Some(&self.conv2_bias), self.config.conv2_spec())?;
        relu_in_place(&mut c2);
        let seq = to_sequence(&c2);
        let (h, h_cache) = self.blstm.forward(&seq)?;
        let alpha = attention_weights(&h, self.attention.data())?;
        let pooled = Tensor::new(&[1, h.shape()[1]], attention_pool(&h, &alpha)?)?;
        let (d1, d1_cache) = self.hidden.forward(&pooled)?;
        let (logits, d2_cache) = self.output.forward(&d1)?;
        logits.check_finite("classifier logits")?;
        Ok(Trace {
            x,
            c1,
            c1_cache,
            c2,
            c2_cache,
            seq,
            h,
            h_cache,
            alpha,
            pooled,
            d1,
            d1_cache,
            d2_cache,
            logits,
        })
    }

    /// Class logits for one spectrogram.
    pub fn forward(&self, mel: &Tensor) -> Result<Vec<f64>> {
        Ok(self.trace(mel)?.logits.into_data())
    }

    pub fn probabilities(&self, mel: &Tensor) -> Result<Vec<f64>> {
        Ok(softmax(&self.forward(mel)?))
    }

    /// Mean cross-entropy over `batch`; gradients (of the mean) accumulate
    /// into the parameters.
    pub fn backward(&mut self, batch: &[(&Tensor, usize)]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Empty("classifier batch".into()));
        }
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for &(mel, label) in batch {
            let tr = self.trace(mel)?;
            let (loss, g_logits) = softmax_cross_entropy(&tr.logits, &[label])?;
            total += loss;
            let g_logits = Tensor::from_fn(g_logits.shape(), |i| g_logits.data()[i] * scale);
            let g_d1 = self.output.backward(&tr.d1, &tr.d2_cache, &g_logits)?;
            let g_pooled = self.hidden.backward(&tr.pooled, &tr.d1_cache, &g_d1)?;
            let (g_h, g_w) = attention_backward(&tr.h, self.attention.data(), &tr.alpha, g_pooled.data())?;
            accumulate(&mut self.attention, &g_w, 1.0);
            let g_seq = self.blstm.backward(&tr.seq, &tr.h_cache, &g_h)?;
            let (c, h, w) = (tr.c2.shape()[1], tr.c2.shape()[2], tr.c2.shape()[3]);
            let mut g_c2 = from_sequence(&g_seq, c, h, w);
            relu_backward_in_place(&tr.c2, &mut g_c2);
            let g2 = conv2d_backward(&tr.c1, &self.conv2_kernels, self.config.conv2_spec(), Some(&tr.c2_cache), &g_c2)?;
            accumulate(&mut self.conv2_kernels, g2.kernels.data(), 1.0);
            accumulate(&mut self.conv2_bias, &g2.bias, 1.0);
            let mut g_c1 = g2.input;
            relu_backward_in_place(&tr.c1, &mut g_c1);
            let g1 = conv2d_backward(&tr.x, &self.conv1_kernels, self.config.conv1_spec(), Some(&tr.c1_cache), &g_c1)?;
            accumulate(&mut self.conv1_kernels, g1.kernels.data(), 1.0);
            accumulate(&mut self.conv1_bias, &g1.bias, 1.0);
        }
        Ok(total * scale)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let meta = serde_json::to_string(&CheckpointMeta {
            kind: "classifier".into(),
            config: self.config.clone(),
        })
        .expect("config serializes");
        let mut ck = Checkpoint::new(meta);
        for (i, p) in self.params().into_iter().enumerate() {
            ck.push(format!("param.{i:02}"), p);
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let meta: CheckpointMeta =
            serde_json::from_str(&ck.metadata).map_err(|e| Error::Checkpoint(format!("metadata: {e}")))?;
        if meta.kind != "classifier" {
            return Err(Error::Checkpoint(format!("expected a classifier checkpoint, got {}", meta.kind)));
        }
        let mut model = Classifier::new(meta.config, &mut Rng::new(0))?;
        for (i, p) in model.params_mut().into_iter().enumerate() {
            let name = format!("param.{i:02}");
            let t = ck.get(&name)?;
            if t.shape() != p.shape() {
                return Err(Error::Checkpoint(format!(
                    "{name}: shape {:?} does not match config {:?}",
                    t.shape(),
                    p.shape()
                )));
            }
            *p = t.clone();
        }
        Ok(model)
    }

    /// Copies parameter values (not gradients) from `other`.
    pub fn load_params_from(&mut self, other: &Classifier) {
        for (p, q) in self.params_mut().into_iter().zip(other.params()) {
            p.data_mut().copy_from_slice(q.data());
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    kind: String,
    config: ClassifierConfig,
}
