//! LSTM and bidirectional LSTM over a single `[T, D]` sequence.
//!
//! Gate layout in the stacked weights is `[input, forget, cell, output]`.

use super::gemm::gemm;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One direction: `w_ih [4U, D]`, `w_hh [4U, U]`, `bias [4U]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lstm {
    pub w_ih: Tensor,
    pub w_hh: Tensor,
    pub bias: Tensor,
}

pub struct LstmCache {
    t: usize,
    /// Post-activation gates per step, `[T, 4U]`.
    gates: Vec<f64>,
    /// Cell state per step, `[T, U]`.
    cells: Vec<f64>,
    /// Hidden state per step, `[T, U]`.
    hidden: Vec<f64>,
}

impl Lstm {
    pub fn zeros(input_dim: usize, units: usize) -> Self {
        Lstm {
            w_ih: Tensor::zeros(&[4 * units, input_dim]),
            w_hh: Tensor::zeros(&[4 * units, units]),
            bias: Tensor::zeros(&[4 * units]),
        }
    }

    pub fn units(&self) -> usize {
        self.w_hh.shape()[1]
    }

    pub fn input_dim(&self) -> usize {
        self.w_ih.shape()[1]
    }

    fn check_input(&self, seq: &Tensor) -> Result<usize> {
        let t = match *seq.shape() {
            [t, d] if d == self.input_dim() => t,
            _ => {
                return Err(Error::shape(format!(
                    "lstm input: expected [T, {}], got {:?}",
                    self.input_dim(),
                    seq.shape()
                )))
            }
        };
        if t == 0 {
            return Err(Error::EmptySequence);
        }
        Ok(t)
    }

    /// Runs the cell over `seq`, returning hidden states `[T, U]`.
    pub fn forward(&self, seq: &Tensor) -> Result<(Tensor, LstmCache)> {
        let t = self.check_input(seq)?;
        let (u, d) = (self.units(), self.input_dim());
        let g4 = 4 * u;
        let mut pre = vec![0.0; t * g4];
        for row in pre.chunks_mut(g4) {
            row.copy_from_slice(self.bias.data());
        }
        gemm(t, d, g4, 1.0, seq.data(), false, self.w_ih.data(), true, 1.0, &mut pre);

        let mut gates = vec![0.0; t * g4];
        let mut cells = vec![0.0; t * u];
        let mut hidden = vec![0.0; t * u];
        let mut h_prev = vec![0.0; u];
        let mut c_prev = vec![0.0; u];
        for step in 0..t {
            let z = &mut pre[step * g4..(step + 1) * g4];
            gemm(1, u, g4, 1.0, &h_prev, false, self.w_hh.data(), true, 1.0, z);
            let gt = &mut gates[step * g4..(step + 1) * g4];
            for k in 0..u {
                let i = sigmoid(z[k]);
                let f = sigmoid(z[u + k]);
                let g = z[2 * u + k].tanh();
                let o = sigmoid(z[3 * u + k]);
                gt[k] = i;
                gt[u + k] = f;
                gt[2 * u + k] = g;
                gt[3 * u + k] = o;
                let c = f * c_prev[k] + i * g;
                cells[step * u + k] = c;
                hidden[step * u + k] = o * c.tanh();
            }
            c_prev.copy_from_slice(&cells[step * u..(step + 1) * u]);
            h_prev.copy_from_slice(&hidden[step * u..(step + 1) * u]);
        }
        let out = Tensor::new(&[t, u], hidden.clone())?;
        Ok((
            out,
            LstmCache {
                t,
                gates,
                cells,
                hidden,
            },
        ))
    }

    /// Backpropagation through time. Accumulates parameter gradients into the
    /// weight tensors' grad buffers and returns the gradient w.r.t. `seq`.
    pub fn backward(&mut self, seq: &Tensor, cache: &LstmCache, grad_hidden: &[f64]) -> Result<Tensor> {
        let (u, d) = (self.units(), self.input_dim());
        let (t, g4) = (cache.t, 4 * u);
        if grad_hidden.len() != t * u {
            return Err(Error::shape(format!(
                "lstm grad: expected {} values, got {}",
                t * u,
                grad_hidden.len()
            )));
        }
        let mut dz_all = vec![0.0; t * g4];
        let mut dh_next = vec![0.0; u];
        let mut dc_next = vec![0.0; u];
        let zeros = vec![0.0; u];
        let w_hh = self.w_hh.data().to_vec();
        let grad_w_hh = self.w_hh.grad_mut();
        for step in (0..t).rev() {
            let gt = &cache.gates[step * g4..(step + 1) * g4];
            let c_prev = if step == 0 {
                &zeros[..]
            } else {
                &cache.cells[(step - 1) * u..step * u]
            };
            let h_prev = if step == 0 {
                &zeros[..]
            } else {
                &cache.hidden[(step - 1) * u..step * u]
            };
            let dz = &mut dz_all[step * g4..(step + 1) * g4];
            for k in 0..u {
                let (i, f, g, o) = (gt[k], gt[u + k], gt[2 * u + k], gt[3 * u + k]);
                let c = cache.cells[step * u + k];
                let tc = c.tanh();
                let dh = grad_hidden[step * u + k] + dh_next[k];
                let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
                dz[k] = dc * g * i * (1.0 - i);
                dz[u + k] = dc * c_prev[k] * f * (1.0 - f);
                dz[2 * u + k] = dc * i * (1.0 - g * g);
                dz[3 * u + k] = dh * tc * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            gemm(g4, 1, u, 1.0, dz, false, h_prev, false, 1.0, grad_w_hh);
            gemm(1, g4, u, 1.0, dz, false, &w_hh, false, 0.0, &mut dh_next);
        }
        gemm(g4, t, d, 1.0, &dz_all, true, seq.data(), false, 1.0, self.w_ih.grad_mut());
        let gb = self.bias.grad_mut();
        for row in dz_all.chunks(g4) {
            for (b, v) in gb.iter_mut().zip(row) {
                *b += v;
            }
        }
        let mut dx = vec![0.0; t * d];
        gemm(t, g4, d, 1.0, &dz_all, false, self.w_ih.data(), false, 0.0, &mut dx);
        Tensor::new(&[t, d], dx)
    }

    pub fn params_mut(&mut self) -> [&mut Tensor; 3] {
        [&mut self.w_ih, &mut self.w_hh, &mut self.bias]
    }

    pub fn params(&self) -> [&Tensor; 3] {
        [&self.w_ih, &self.w_hh, &self.bias]
    }
}

fn reversed_rows(t: &Tensor) -> Tensor {
    let (rows, cols) = (t.shape()[0], t.shape()[1]);
    let mut out = Vec::with_capacity(t.len());
    for r in (0..rows).rev() {
        out.extend_from_slice(&t.data()[r * cols..(r + 1) * cols]);
    }
    Tensor::new(t.shape(), out).expect("same shape")
}

/// Bidirectional LSTM: output `[T, 2U]`, forward half first.
#[derive(Clone, Debug, PartialEq)]
pub struct BiLstm {
    pub forward: Lstm,
    pub backward: Lstm,
}

pub struct BiLstmCache {
    fwd: LstmCache,
    bwd: LstmCache,
    reversed: Tensor,
}

impl BiLstm {
    pub fn zeros(input_dim: usize, units: usize) -> Self {
        BiLstm {
            forward: Lstm::zeros(input_dim, units),
            backward: Lstm::zeros(input_dim, units),
        }
    }

    pub fn units(&self) -> usize {
        self.forward.units()
    }

    pub fn forward(&self, seq: &Tensor) -> Result<(Tensor, BiLstmCache)> {
        let (hf, fwd) = self.forward.forward(seq)?;
        let reversed = reversed_rows(seq);
        let (hb, bwd) = self.backward.forward(&reversed)?;
        let (t, u) = (hf.shape()[0], self.units());
        let mut out = vec![0.0; t * 2 * u];
        for step in 0..t {
            out[step * 2 * u..step * 2 * u + u].copy_from_slice(&hf.data()[step * u..(step + 1) * u]);
            let rs = t - 1 - step;
            out[step * 2 * u + u..(step + 1) * 2 * u].copy_from_slice(&hb.data()[rs * u..(rs + 1) * u]);
        }
        Ok((Tensor::new(&[t, 2 * u], out)?, BiLstmCache { fwd, bwd, reversed }))
    }

    pub fn backward(&mut self, seq: &Tensor, cache: &BiLstmCache, grad_out: &Tensor) -> Result<Tensor> {
        let (t, u) = (cache.fwd.t, self.units());
        grad_out.expect_shape("bilstm grad", &[t, 2 * u])?;
        let mut gf = vec![0.0; t * u];
        let mut gb = vec![0.0; t * u];
        for step in 0..t {
            let row = &grad_out.data()[step * 2 * u..(step + 1) * 2 * u];
            gf[step * u..(step + 1) * u].copy_from_slice(&row[..u]);
            let rs = t - 1 - step;
            gb[rs * u..(rs + 1) * u].copy_from_slice(&row[u..]);
        }
        let mut dx = self.forward.backward(seq, &cache.fwd, &gf)?;
        let dx_rev = self.backward.backward(&cache.reversed, &cache.bwd, &gb)?;
        let back = reversed_rows(&dx_rev);
        for (a, b) in dx.data_mut().iter_mut().zip(back.data()) {
            *a += b;
        }
        Ok(dx)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v: Vec<&mut Tensor> = self.forward.params_mut().into_iter().collect();
        v.extend(self.backward.params_mut());
        v
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut v: Vec<&Tensor> = self.forward.params().into_iter().collect();
        v.extend(self.backward.params());
        v
    }
}
