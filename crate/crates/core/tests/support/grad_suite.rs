//! Central finite-difference checks of every hand-written backward pass.
//! Shared by the core gradient tests and the acceptance suite.

use serann::classifier::{attention_backward, attention_pool, attention_weights, Classifier, ClassifierConfig};
use serann::coremath::{
    conv2d_backward, conv2d_cached, conv2d_transpose, conv2d_transpose_backward, finite_diff_grad_check,
    softmax_cross_entropy, Activation, BiLstm, ConvSpec, Dense, GradCheckReport, Padding, Rng, Tensor,
    GRAD_CHECK_EPSILON,
};
use serann::vqvae::{VqVae, VqVaeConfig};

pub const TOLERANCE: f64 = 1e-4;

fn rand_tensor(shape: &[usize], rng: &mut Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.uniform(-1.0, 1.0))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Splits a flat point back into tensors of the given shapes.
fn unflatten(point: &[f64], shapes: &[Vec<usize>]) -> Vec<Tensor> {
    let mut at = 0;
    shapes
        .iter()
        .map(|s| {
            let n: usize = s.iter().product();
            let t = Tensor::new(s, point[at..at + n].to_vec()).unwrap();
            at += n;
            t
        })
        .collect()
}

fn flatten<'a>(ts: impl IntoIterator<Item = &'a Tensor>) -> Vec<f64> {
    ts.into_iter().flat_map(|t| t.data().to_vec()).collect()
}

fn set_params(params: Vec<&mut Tensor>, point: &[f64]) {
    let mut at = 0;
    for p in params {
        let n = p.len();
        p.data_mut().copy_from_slice(&point[at..at + n]);
        at += n;
    }
}

fn grads<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Vec<f64> {
    params
        .into_iter()
        .flat_map(|p| p.grad().map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; p.len()]))
        .collect()
}

fn check(op: impl FnMut(&[f64]) -> (f64, Vec<f64>), point: &[f64]) -> GradCheckReport {
    finite_diff_grad_check(op, point, GRAD_CHECK_EPSILON)
}

pub fn conv() -> GradCheckReport {
    let mut rng = Rng::new(101);
    let spec = ConvSpec::new(
        (2, 1),
        Padding {
            top: 1,
            bottom: 0,
            left: 1,
            right: 1,
        },
    );
    let shapes = vec![vec![2, 2, 5, 4], vec![3, 2, 3, 3], vec![3]];
    let point = flatten(&[rand_tensor(&shapes[0], &mut rng), rand_tensor(&shapes[1], &mut rng), rand_tensor(&shapes[2], &mut rng)]);
    let (oh, ow) = spec.output_hw(5, 4, 3, 3).unwrap();
    let proj = rand_tensor(&[2, 3, oh, ow], &mut rng);
    check(
        |p| {
            let t = unflatten(p, &shapes);
            let (y, cache) = conv2d_cached(&t[0], &t[1], Some(&t[2]), spec).unwrap();
            let g = conv2d_backward(&t[0], &t[1], spec, Some(&cache), &proj).unwrap();
            let grad = [g.input.data(), g.kernels.data(), &g.bias].concat();
            (dot(y.data(), proj.data()), grad)
        },
        &point,
    )
}

pub fn conv_transpose() -> GradCheckReport {
    let mut rng = Rng::new(102);
    let spec = ConvSpec::new((2, 2), Padding::uniform(1));
    let out_hw = (6, 5);
    let shapes = vec![vec![2, 3, 3, 3], vec![3, 2, 3, 3], vec![2]];
    let point = flatten(&[rand_tensor(&shapes[0], &mut rng), rand_tensor(&shapes[1], &mut rng), rand_tensor(&shapes[2], &mut rng)]);
    let proj = rand_tensor(&[2, 2, out_hw.0, out_hw.1], &mut rng);
    check(
        |p| {
            let t = unflatten(p, &shapes);
            let y = conv2d_transpose(&t[0], &t[1], Some(&t[2]), spec, out_hw).unwrap();
            let g = conv2d_transpose_backward(&t[0], &t[1], spec, &proj).unwrap();
            let grad = [g.input.data(), g.kernels.data(), &g.bias].concat();
            (dot(y.data(), proj.data()), grad)
        },
        &point,
    )
}

pub fn blstm() -> GradCheckReport {
    let mut rng = Rng::new(103);
    let (t, d, u) = (3, 2, 2);
    let mut layer = BiLstm::zeros(d, u);
    for p in layer.params_mut() {
        *p = Tensor::from_fn(p.shape(), |_| rng.uniform(-0.8, 0.8));
    }
    let seq = rand_tensor(&[t, d], &mut rng);
    let proj = rand_tensor(&[t, 2 * u], &mut rng);
    let mut point = seq.data().to_vec();
    point.extend(flatten(layer.params()));
    check(
        |p| {
            let mut l = layer.clone();
            set_params(l.params_mut(), &p[t * d..]);
            let x = Tensor::new(&[t, d], p[..t * d].to_vec()).unwrap();
            let (y, cache) = l.forward(&x).unwrap();
            let dx = l.backward(&x, &cache, &proj).unwrap();
            let mut grad = dx.into_data();
            grad.extend(grads(l.params()));
            (dot(y.data(), proj.data()), grad)
        },
        &point,
    )
}

pub fn dense(activation: Activation) -> GradCheckReport {
    let mut rng = Rng::new(104);
    let mut layer = Dense::zeros(4, 3, activation);
    layer.weights = rand_tensor(&[4, 3], &mut rng);
    layer.bias = rand_tensor(&[3], &mut rng);
    let x = rand_tensor(&[2, 4], &mut rng);
    let proj = rand_tensor(&[2, 3], &mut rng);
    let mut point = x.data().to_vec();
    point.extend(flatten(layer.params()));
    check(
        |p| {
            let mut l = layer.clone();
            set_params(l.params_mut().into_iter().collect(), &p[8..]);
            let x = Tensor::new(&[2, 4], p[..8].to_vec()).unwrap();
            let (y, cache) = l.forward(&x).unwrap();
            let dx = l.backward(&x, &cache, &proj).unwrap();
            let mut grad = dx.into_data();
            grad.extend(grads(l.params()));
            (dot(y.data(), proj.data()), grad)
        },
        &point,
    )
}

pub fn attention() -> GradCheckReport {
    let mut rng = Rng::new(105);
    let (t, d) = (4, 3);
    let point: Vec<f64> = (0..t * d + d).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let proj: Vec<f64> = (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect();
    check(
        |p| {
            let h = Tensor::new(&[t, d], p[..t * d].to_vec()).unwrap();
            let w = &p[t * d..];
            let alpha = attention_weights(&h, w).unwrap();
            let r = attention_pool(&h, &alpha).unwrap();
            let (dh, dw) = attention_backward(&h, w, &alpha, &proj).unwrap();
            let mut grad = dh.into_data();
            grad.extend(dw);
            (dot(&r, &proj), grad)
        },
        &point,
    )
}

pub fn softmax_ce() -> GradCheckReport {
    let mut rng = Rng::new(106);
    let labels = [2, 0, 3];
    let point: Vec<f64> = (0..12).map(|_| rng.uniform(-2.0, 2.0)).collect();
    check(
        |p| {
            let logits = Tensor::new(&[3, 4], p.to_vec()).unwrap();
            let (loss, g) = softmax_cross_entropy(&logits, &labels).unwrap();
            (loss, g.into_data())
        },
        &point,
    )
}

pub fn toy_vqvae_config() -> VqVaeConfig {
    VqVaeConfig {
        codebook_size: 4,
        code_dim: 3,
        channels: vec![2, 2, 2, 2],
        input_hw: (80, 8),
        batch_size: 1,
        ..VqVaeConfig::desk()
    }
}

/// Checks the straight-through training objective. With the codes fixed at
/// the base point, every stop-gradient becomes a constant:
/// `recon(x, dec(z_e + (z_q0 - z_e0))) + ||z_e0 - e||^2 + beta ||z_e - e0||^2`
/// (distances averaged over positions), whose exact gradient is what the
/// estimator delivers to every parameter.
pub fn vqvae() -> GradCheckReport {
    let mut rng = Rng::new(107);
    let cfg = toy_vqvae_config();
    let mut model = VqVae::new(cfg.clone(), &mut rng).unwrap();
    // Zero biases put every pre-activation over an all-zero input exactly on
    // the ReLU kink; move off it.
    for p in model.params_mut().into_iter().filter(|p| p.rank() == 1) {
        *p = Tensor::from_fn(p.shape(), |_| rng.uniform(-0.1, 0.1));
    }
    let x = Tensor::from_fn(&[80, 8], |_| rng.uniform(-1.0, 1.0));
    // Spread the codebook over the encoder's output range so several codes are in use.
    let z0 = model.encode(&x).unwrap();
    let (p_count, d) = (z0.shape()[0], cfg.code_dim);
    model.codebook = Tensor::from_fn(&[4, d], |i| z0.data()[i % z0.len()] + rng.uniform(-0.3, 0.3));
    let base = model.forward(&[&x]).unwrap();
    let (z_e0, z_q0, codes0) = (base.z_e.clone(), base.z_q.clone(), base.codes.clone());
    let point = flatten(model.params());
    check(
        |p| {
            let mut m = model.clone();
            set_params(m.params_mut(), p);
            let z_e = m.encode(&x).unwrap();
            let st = Tensor::from_fn(z_e.shape(), |i| z_e.data()[i] + (z_q0.data()[i] - z_e0.data()[i]));
            let x_hat = m.decode(&st).unwrap();
            let recon = x.data().iter().zip(x_hat.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64;
            let (mut cb, mut commit) = (0.0, 0.0);
            for (pos, &c) in codes0.iter().enumerate() {
                for j in 0..d {
                    let e = m.codebook.data()[c * d + j];
                    cb += (z_e0.data()[pos * d + j] - e).powi(2);
                    commit += (z_e.data()[pos * d + j] - z_q0.data()[pos * d + j]).powi(2);
                }
            }
            let value = recon + (cb + cfg.beta * commit) / p_count as f64;
            m.zero_grad();
            m.backward(&[&x]).unwrap();
            (value, grads(m.params()))
        },
        &point,
    )
}

pub fn toy_classifier_config() -> ClassifierConfig {
    ClassifierConfig {
        input_hw: (16, 12),
        conv1_filters: 2,
        conv2_filters: 2,
        blstm_units: 3,
        dense_units: 4,
        ..ClassifierConfig::desk()
    }
}

pub fn classifier() -> GradCheckReport {
    let mut rng = Rng::new(108);
    let mut model = Classifier::new(toy_classifier_config(), &mut rng).unwrap();
    for p in model.params_mut().into_iter().filter(|p| p.rank() == 1) {
        *p = Tensor::from_fn(p.shape(), |_| rng.uniform(-0.1, 0.1));
    }
    let x = Tensor::from_fn(&[16, 12], |_| rng.uniform(-1.0, 1.0));
    let point = flatten(model.params());
    check(
        |p| {
            let mut m = model.clone();
            set_params(m.params_mut(), p);
            m.zero_grad();
            let loss = m.backward(&[(&x, 1)]).unwrap();
            (loss, grads(m.params()))
        },
        &point,
    )
}

/// Every check, by name.
pub fn run_all() -> Vec<(&'static str, GradCheckReport)> {
    vec![
        ("conv2d", conv()),
        ("conv2d_transpose", conv_transpose()),
        ("blstm", blstm()),
        ("dense_relu", dense(Activation::Relu)),
        ("dense_linear", dense(Activation::None)),
        ("attention", attention()),
        ("softmax_cross_entropy", softmax_ce()),
        ("vqvae", vqvae()),
        ("classifier", classifier()),
    ]
}
