//! 2-D convolution and its transpose, via im2col + GEMM.
//!
//! Kernels for `conv2d` are `[F, C, kh, kw]`. Kernels for `conv2d_transpose` are
//! `[C_in, C_out, kh, kw]`: the transpose is the adjoint of a `conv2d` whose
//! kernels have the same layout read as `[F = C_in, C = C_out]`, so a matched
//! pair shares geometry and the shape maps invert exactly.

use super::gemm::gemm;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Padding {
    pub top: usize,
    pub bottom: usize,
    pub left: usize,
    pub right: usize,
}

impl Padding {
    pub fn uniform(p: usize) -> Self {
        Padding {
            top: p,
            bottom: p,
            left: p,
            right: p,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: (usize, usize),
    pub padding: Padding,
}

impl ConvSpec {
    pub fn new(stride: (usize, usize), padding: Padding) -> Self {
        ConvSpec { stride, padding }
    }

    /// Output size of a forward convolution over an `h x w` plane.
    pub fn output_hw(&self, h: usize, w: usize, kh: usize, kw: usize) -> Result<(usize, usize)> {
        let (sh, sw) = self.stride;
        if sh == 0 || sw == 0 {
            return Err(Error::shape(format!("stride must be >= 1, got {:?}", self.stride)));
        }
        let ph = h + self.padding.top + self.padding.bottom;
        let pw = w + self.padding.left + self.padding.right;
        if kh > ph {
            return Err(Error::shape(format!(
                "axis H: kernel {kh} exceeds padded input {ph}"
            )));
        }
        if kw > pw {
            return Err(Error::shape(format!(
                "axis W: kernel {kw} exceeds padded input {pw}"
            )));
        }
        Ok(((ph - kh) / sh + 1, (pw - kw) / sw + 1))
    }
}

struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
    spec: ConvSpec,
}

impl Geometry {
    fn rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }

    /// Source pixel for im2col entry, or `None` when it lands in padding.
    #[inline]
    fn source(&self, i: usize, j: usize, oy: usize, ox: usize) -> Option<(usize, usize)> {
        let y = (oy * self.spec.stride.0 + i) as isize - self.spec.padding.top as isize;
        let x = (ox * self.spec.stride.1 + j) as isize - self.spec.padding.left as isize;
        if y < 0 || x < 0 || y >= self.h as isize || x >= self.w as isize {
            None
        } else {
            Some((y as usize, x as usize))
        }
    }

    fn im2col(&self, plane: &[f64], cols: &mut [f64]) {
        let n = self.cols();
        for c in 0..self.c {
            for i in 0..self.kh {
                for j in 0..self.kw {
                    let row = (c * self.kh + i) * self.kw + j;
                    let dst = &mut cols[row * n..(row + 1) * n];
                    for oy in 0..self.oh {
                        for ox in 0..self.ow {
                            dst[oy * self.ow + ox] = match self.source(i, j, oy, ox) {
                                Some((y, x)) => plane[(c * self.h + y) * self.w + x],
                                None => 0.0,
                            };
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, cols: &[f64], plane: &mut [f64]) {
        let n = self.cols();
        for c in 0..self.c {
            for i in 0..self.kh {
                for j in 0..self.kw {
                    let row = (c * self.kh + i) * self.kw + j;
                    let src = &cols[row * n..(row + 1) * n];
                    for oy in 0..self.oh {
                        for ox in 0..self.ow {
                            if let Some((y, x)) = self.source(i, j, oy, ox) {
                                plane[(c * self.h + y) * self.w + x] += src[oy * self.ow + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn dims4(t: &Tensor, what: &str) -> Result<(usize, usize, usize, usize)> {
    match *t.shape() {
        [a, b, c, d] => Ok((a, b, c, d)),
        _ => Err(Error::shape(format!(
            "{what}: expected rank-4 tensor, got shape {:?}",
            t.shape()
        ))),
    }
}

fn check_bias(bias: Option<&Tensor>, channels: usize) -> Result<()> {
    if let Some(b) = bias {
        if b.shape() != [channels] {
            return Err(Error::shape(format!(
                "bias: expected [{channels}], got {:?}",
                b.shape()
            )));
        }
    }
    Ok(())
}

/// Forward convolution. Input `[N, C, H, W]`, kernels `[F, C, kh, kw]`.
pub fn conv2d(input: &Tensor, kernels: &Tensor, bias: Option<&Tensor>, spec: ConvSpec) -> Result<Tensor> {
    let (out, _) = conv2d_cached(input, kernels, bias, spec)?;
    Ok(out)
}

/// im2col buffers kept from the forward pass for reuse in backward.
pub struct ConvCache {
    cols: Vec<Vec<f64>>,
}

fn conv_geometry(input: &Tensor, kernels: &Tensor, spec: ConvSpec) -> Result<(usize, usize, Geometry)> {
    let (n, c, h, w) = dims4(input, "conv2d input")?;
    let (f, kc, kh, kw) = dims4(kernels, "conv2d kernels")?;
    if kc != c {
        return Err(Error::shape(format!(
            "axis C: input has {c} channels, kernels expect {kc}"
        )));
    }
    let (oh, ow) = spec.output_hw(h, w, kh, kw)?;
    Ok((
        n,
        f,
        Geometry {
            c,
            h,
            w,
            kh,
            kw,
            oh,
            ow,
            spec,
        },
    ))
}

pub fn conv2d_cached(
    input: &Tensor,
    kernels: &Tensor,
    bias: Option<&Tensor>,
    spec: ConvSpec,
) -> Result<(Tensor, ConvCache)> {
    let (n, f, g) = conv_geometry(input, kernels, spec)?;
    check_bias(bias, f)?;
    let (rows, ncols) = (g.rows(), g.cols());
    let plane = g.c * g.h * g.w;
    let mut out = vec![0.0; n * f * ncols];
    let mut caches = Vec::with_capacity(n);
    for s in 0..n {
        let mut cols = vec![0.0; rows * ncols];
        g.im2col(&input.data()[s * plane..(s + 1) * plane], &mut cols);
        let dst = &mut out[s * f * ncols..(s + 1) * f * ncols];
        if let Some(b) = bias {
            for (fi, chunk) in dst.chunks_mut(ncols).enumerate() {
                chunk.iter_mut().for_each(|v| *v = b.data()[fi]);
            }
        }
        gemm(f, rows, ncols, 1.0, kernels.data(), false, &cols, false, 1.0, dst);
        caches.push(cols);
    }
    Ok((Tensor::new(&[n, f, g.oh, g.ow], out)?, ConvCache { cols: caches }))
}

/// Gradients of a forward convolution.
pub struct ConvGrads {
    pub input: Tensor,
    pub kernels: Tensor,
    pub bias: Vec<f64>,
}

pub fn conv2d_backward(
    input: &Tensor,
    kernels: &Tensor,
    spec: ConvSpec,
    cache: Option<&ConvCache>,
    grad_out: &Tensor,
) -> Result<ConvGrads> {
    let (n, f, g) = conv_geometry(input, kernels, spec)?;
    grad_out.expect_shape("conv2d grad_out", &[n, f, g.oh, g.ow])?;
    let (rows, ncols) = (g.rows(), g.cols());
    let plane = g.c * g.h * g.w;
    let mut grad_in = vec![0.0; input.len()];
    let mut grad_k = vec![0.0; kernels.len()];
    let mut grad_b = vec![0.0; f];
    let mut gcols = vec![0.0; rows * ncols];
    let mut scratch = Vec::new();
    for s in 0..n {
        let go = &grad_out.data()[s * f * ncols..(s + 1) * f * ncols];
        for (fi, chunk) in go.chunks(ncols).enumerate() {
            grad_b[fi] += chunk.iter().sum::<f64>();
        }
        let cols: &[f64] = match cache {
            Some(c) => &c.cols[s],
            None => {
                scratch.resize(rows * ncols, 0.0);
                g.im2col(&input.data()[s * plane..(s + 1) * plane], &mut scratch);
                &scratch
            }
        };
        gemm(f, ncols, rows, 1.0, go, false, cols, true, 1.0, &mut grad_k);
        gemm(rows, f, ncols, 1.0, kernels.data(), true, go, false, 0.0, &mut gcols);
        g.col2im(&gcols, &mut grad_in[s * plane..(s + 1) * plane]);
    }
    Ok(ConvGrads {
        input: Tensor::new(input.shape(), grad_in)?,
        kernels: Tensor::new(kernels.shape(), grad_k)?,
        bias: grad_b,
    })
}

fn transpose_geometry(
    input: &Tensor,
    kernels: &Tensor,
    spec: ConvSpec,
    output_hw: (usize, usize),
) -> Result<(usize, usize, usize, Geometry)> {
    let (n, cin, h, w) = dims4(input, "conv2d_transpose input")?;
    let (kc, cout, kh, kw) = dims4(kernels, "conv2d_transpose kernels")?;
    if kc != cin {
        return Err(Error::shape(format!(
            "axis C: input has {cin} channels, kernels expect {kc}"
        )));
    }
    let (oh, ow) = output_hw;
    let mapped = spec.output_hw(oh, ow, kh, kw)?;
    if mapped != (h, w) {
        return Err(Error::shape(format!(
            "axes H,W: output {oh}x{ow} maps to {}x{} under the paired conv, input is {h}x{w}",
            mapped.0, mapped.1
        )));
    }
    Ok((
        n,
        cin,
        cout,
        Geometry {
            c: cout,
            h: oh,
            w: ow,
            kh,
            kw,
            oh: h,
            ow: w,
            spec,
        },
    ))
}

/// Transposed convolution producing an `output_hw` plane; `output_hw` must map
/// back to the input size under the paired forward convolution.
pub fn conv2d_transpose(
    input: &Tensor,
    kernels: &Tensor,
    bias: Option<&Tensor>,
    spec: ConvSpec,
    output_hw: (usize, usize),
) -> Result<Tensor> {
    let (n, cin, cout, g) = transpose_geometry(input, kernels, spec, output_hw)?;
    check_bias(bias, cout)?;
    let (rows, ncols) = (g.rows(), g.cols());
    let in_plane = cin * ncols;
    let out_plane = cout * g.h * g.w;
    let mut out = vec![0.0; n * out_plane];
    let mut cols = vec![0.0; rows * ncols];
    for s in 0..n {
        let x = &input.data()[s * in_plane..(s + 1) * in_plane];
        gemm(rows, cin, ncols, 1.0, kernels.data(), true, x, false, 0.0, &mut cols);
        let dst = &mut out[s * out_plane..(s + 1) * out_plane];
        if let Some(b) = bias {
            let hw = g.h * g.w;
            for (ci, chunk) in dst.chunks_mut(hw).enumerate() {
                chunk.iter_mut().for_each(|v| *v = b.data()[ci]);
            }
        }
        g.col2im(&cols, dst);
    }
    Tensor::new(&[n, cout, output_hw.0, output_hw.1], out)
}

pub fn conv2d_transpose_backward(
    input: &Tensor,
    kernels: &Tensor,
    spec: ConvSpec,
    grad_out: &Tensor,
) -> Result<ConvGrads> {
    let (oh, ow) = match *grad_out.shape() {
        [_, _, a, b] => (a, b),
        _ => return Err(Error::shape("conv2d_transpose grad_out must be rank 4")),
    };
    let (n, cin, cout, g) = transpose_geometry(input, kernels, spec, (oh, ow))?;
    grad_out.expect_shape("conv2d_transpose grad_out", &[n, cout, oh, ow])?;
    let (rows, ncols) = (g.rows(), g.cols());
    let in_plane = cin * ncols;
    let out_plane = cout * oh * ow;
    let mut grad_in = vec![0.0; input.len()];
    let mut grad_k = vec![0.0; kernels.len()];
    let mut grad_b = vec![0.0; cout];
    let mut gcols = vec![0.0; rows * ncols];
    for s in 0..n {
        let go = &grad_out.data()[s * out_plane..(s + 1) * out_plane];
        for (ci, chunk) in go.chunks(oh * ow).enumerate() {
            grad_b[ci] += chunk.iter().sum::<f64>();
        }
        g.im2col(go, &mut gcols);
        let x = &input.data()[s * in_plane..(s + 1) * in_plane];
        gemm(cin, rows, ncols, 1.0, kernels.data(), false, &gcols, false, 0.0, &mut grad_in[s * in_plane..(s + 1) * in_plane]);
        gemm(cin, ncols, rows, 1.0, x, false, &gcols, true, 1.0, &mut grad_k);
    }
    Ok(ConvGrads {
        input: Tensor::new(input.shape(), grad_in)?,
        kernels: Tensor::new(kernels.shape(), grad_k)?,
        bias: grad_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel_reproduces_input() {
        let x = Tensor::from_fn(&[1, 1, 3, 3], |i| i as f64 - 4.0);
        let k = Tensor::full(&[1, 1, 1, 1], 1.0);
        let y = conv2d(&x, &k, None, ConvSpec::new((1, 1), Padding::default())).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn ones_kernel_sums_receptive_fields() {
        let x = Tensor::full(&[1, 1, 4, 4], 1.0);
        let k = Tensor::full(&[1, 1, 2, 2], 1.0);
        let y = conv2d(&x, &k, None, ConvSpec::new((2, 2), Padding::default())).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert!(y.data().iter().all(|&v| v == 4.0));
    }

    #[test]
    fn stride_two_kernel_three_halves_mel_plane() {
        let spec = ConvSpec::new((2, 2), Padding::uniform(1));
        assert_eq!(spec.output_hw(80, 256, 3, 3).unwrap(), (40, 128));
    }

    #[test]
    fn transpose_inverts_the_shape_map() {
        let spec = ConvSpec::new((2, 2), Padding::uniform(1));
        let x = Tensor::zeros(&[1, 2, 40, 128]);
        let k = Tensor::zeros(&[2, 1, 3, 3]);
        let y = conv2d_transpose(&x, &k, None, spec, (80, 256)).unwrap();
        assert_eq!(y.shape(), &[1, 1, 80, 256]);
    }

    #[test]
    fn transpose_identity_case() {
        let x = Tensor::from_fn(&[1, 1, 3, 2], |i| i as f64 * 0.5);
        let k = Tensor::full(&[1, 1, 1, 1], 1.0);
        let y = conv2d_transpose(&x, &k, None, ConvSpec::new((1, 1), Padding::default()), (3, 2)).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn channel_mismatch_names_the_axis() {
        let x = Tensor::zeros(&[1, 2, 4, 4]);
        let k = Tensor::zeros(&[1, 3, 2, 2]);
        let err = conv2d(&x, &k, None, ConvSpec::new((1, 1), Padding::default())).unwrap_err();
        assert!(err.to_string().contains("axis C"), "{err}");
    }

    #[test]
    fn oversized_kernel_is_rejected() {
        let x = Tensor::zeros(&[1, 1, 2, 8]);
        let k = Tensor::zeros(&[1, 1, 3, 3]);
        let err = conv2d(&x, &k, None, ConvSpec::new((1, 1), Padding::default())).unwrap_err();
        assert!(err.to_string().contains("axis H"), "{err}");
    }

    #[test]
    fn transpose_is_adjoint_of_conv() {
        // <conv(x), y> == <x, conv_t(y)> for matched geometry.
        let spec = ConvSpec::new((2, 1), Padding { top: 1, bottom: 0, left: 1, right: 1 });
        let x = Tensor::from_fn(&[2, 3, 7, 5], |i| ((i * 7919) % 13) as f64 / 13.0 - 0.5);
        let k = Tensor::from_fn(&[4, 3, 3, 3], |i| ((i * 104729) % 17) as f64 / 17.0 - 0.5);
        let y = conv2d(&x, &k, None, spec).unwrap();
        let probe = Tensor::from_fn(y.shape(), |i| ((i * 31) % 11) as f64 / 11.0 - 0.5);
        let xt = conv2d_transpose(&probe, &k, None, spec, (7, 5)).unwrap();
        let lhs: f64 = y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.data().iter().zip(xt.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }
}
