//! Primitive layers. All arithmetic is `f32`.

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu6,
    Sigmoid,
    Softmax,
}

fn shape_err(layer: &str, reason: String) -> Error {
    Error::Shape {
        layer: layer.to_string(),
        reason,
    }
}

/// Output spatial size of a strided, padded window.
pub fn conv_out_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> usize {
    (input + 2 * padding - kernel) / stride + 1
}

fn check_conv_args(
    layer: &str,
    input: &Tensor,
    kernel: &Tensor,
    bias: &[f32],
    stride: usize,
    padding: usize,
    depthwise: bool,
) -> Result<(usize, usize, usize, usize, usize)> {
    let (c_in, h, w) = input.chw().ok_or_else(|| {
        shape_err(
            layer,
            format!("input must be rank 3, got {:?}", input.shape()),
        )
    })?;
    let (c_out, k_in, kh, kw) = match kernel.shape()[..] {
        [a, b, c, d] => (a, b, c, d),
        _ => {
            return Err(shape_err(
                layer,
                format!("kernel must be rank 4, got {:?}", kernel.shape()),
            ))
        }
    };
    if kh != kw {
        return Err(shape_err(
            layer,
            format!("kernel must be square, got {kh}x{kw}"),
        ));
    }
    let expected_in = if depthwise { 1 } else { c_in };
    if k_in != expected_in || (depthwise && c_out != c_in) {
        return Err(shape_err(
            layer,
            format!(
                "kernel {:?} does not fit input with {c_in} channels",
                kernel.shape()
            ),
        ));
    }
    if bias.len() != c_out {
        return Err(shape_err(
            layer,
            format!("bias has {} values for {c_out} output channels", bias.len()),
        ));
    }
    if stride == 0 || h + 2 * padding < kh || w + 2 * padding < kw {
        return Err(shape_err(
            layer,
            format!("kernel {kh} stride {stride} padding {padding} does not fit {h}x{w}"),
        ));
    }
    Ok((c_in, c_out, h, w, kh))
}

/// Cross-correlation with zero padding. Kernel is `(C_out, C_in, k, k)`.
pub fn conv2d(
    input: &Tensor,
    kernel: &Tensor,
    bias: &[f32],
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let (c_in, c_out, h, w, k) =
        check_conv_args("conv2d", input, kernel, bias, stride, padding, false)?;
    if k == 1 && stride == 1 && padding == 0 {
        return Ok(pointwise(input, kernel, bias, c_in, c_out, h * w, h, w));
    }
    let ho = conv_out_dim(h, k, stride, padding);
    let wo = conv_out_dim(w, k, stride, padding);
    let (padded, hp, wp) = pad(input.data(), c_in, h, w, padding);
    // im2col: one row per (ci, ky, kx), one column per output pixel.
    let n = ho * wo;
    let depth = c_in * k * k;
    let mut cols = vec![0.0f32; depth * n];
    for ci in 0..c_in {
        let src = &padded[ci * hp * wp..(ci + 1) * hp * wp];
        for ky in 0..k {
            for kx in 0..k {
                let r = (ci * k + ky) * k + kx;
                let dst = &mut cols[r * n..(r + 1) * n];
                for oy in 0..ho {
                    let row = &src[(oy * stride + ky) * wp + kx..];
                    for (ox, d) in dst[oy * wo..(oy + 1) * wo].iter_mut().enumerate() {
                        *d = row[ox * stride];
                    }
                }
            }
        }
    }
    let mut out = fill_bias(bias, n);
    gemm(c_out, depth, n, kernel.data(), &cols, &mut out);
    Tensor::new(vec![c_out, ho, wo], out)
}

/// Copy of `(c, h, w)` with a zero border of `p` on each spatial side.
fn pad(x: &[f32], c: usize, h: usize, w: usize, p: usize) -> (Vec<f32>, usize, usize) {
    let (hp, wp) = (h + 2 * p, w + 2 * p);
    if p == 0 {
        return (x[..c * h * w].to_vec(), hp, wp);
    }
    let mut out = vec![0.0f32; c * hp * wp];
    for ch in 0..c {
        for y in 0..h {
            let src = &x[(ch * h + y) * w..(ch * h + y + 1) * w];
            let at = (ch * hp + y + p) * wp + p;
            out[at..at + w].copy_from_slice(src);
        }
    }
    (out, hp, wp)
}

fn fill_bias(bias: &[f32], plane: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(bias.len() * plane);
    for &b in bias {
        out.extend(std::iter::repeat_n(b, plane));
    }
    out
}

/// `c += a b` for row-major `a (m, k)`, `b (k, n)`, `c (m, n)`.
fn gemm(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], c: &mut [f32]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: bounds checked above; strides describe dense row-major storage.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Per-channel spatial filter. Kernel is `(C, 1, k, k)`.
pub fn depthwise_conv2d(
    input: &Tensor,
    kernel: &Tensor,
    bias: &[f32],
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let (c, _, h, w, k) = check_conv_args(
        "depthwise_conv2d",
        input,
        kernel,
        bias,
        stride,
        padding,
        true,
    )?;
    let ho = conv_out_dim(h, k, stride, padding);
    let wo = conv_out_dim(w, k, stride, padding);
    // Work channel-last on a zero-padded copy so the inner loop runs over
    // channels with no bounds logic.
    let (hp, wp) = (h + 2 * padding, w + 2 * padding);
    let mut padded = vec![0.0f32; hp * wp * c];
    for (ch, src) in input.data().chunks_exact(h * w).enumerate() {
        for (y, row) in src.chunks_exact(w).enumerate() {
            let base = ((y + padding) * wp + padding) * c + ch;
            for (x, &v) in row.iter().enumerate() {
                padded[base + x * c] = v;
            }
        }
    }
    let kk = k * k;
    let mut taps = vec![0.0f32; kk * c];
    for (ch, t) in kernel.data().chunks_exact(kk).enumerate() {
        for (i, &v) in t.iter().enumerate() {
            taps[i * c + ch] = v;
        }
    }
    let mut acc = vec![0.0f32; c];
    let mut out = vec![0.0f32; c * ho * wo];
    for oy in 0..ho {
        for ox in 0..wo {
            acc.copy_from_slice(bias);
            for ky in 0..k {
                let at = ((oy * stride + ky) * wp + ox * stride) * c;
                let window = &padded[at..at + k * c];
                let t = &taps[ky * k * c..(ky + 1) * k * c];
                for (src, tap) in window.chunks_exact(c).zip(t.chunks_exact(c)) {
                    for ((a, &s), &g) in acc.iter_mut().zip(src).zip(tap) {
                        *a += s * g;
                    }
                }
            }
            let pix = oy * wo + ox;
            for (ch, &v) in acc.iter().enumerate() {
                out[ch * ho * wo + pix] = v;
            }
        }
    }
    Tensor::new(vec![c, ho, wo], out)
}

#[allow(clippy::too_many_arguments)]
fn pointwise(
    input: &Tensor,
    kernel: &Tensor,
    bias: &[f32],
    c_in: usize,
    c_out: usize,
    plane: usize,
    h: usize,
    w: usize,
) -> Tensor {
    let mut out = fill_bias(bias, plane);
    gemm(c_out, c_in, plane, kernel.data(), input.data(), &mut out);
    Tensor::new(vec![c_out, h, w], out).expect("pointwise output shape")
}

pub fn activation(input: &Tensor, kind: Activation) -> Result<Tensor> {
    let mut out = input.clone();
    activate_in_place(&mut out, kind)?;
    Ok(out)
}

pub fn activate_in_place(t: &mut Tensor, kind: Activation) -> Result<()> {
    match kind {
        Activation::Relu6 => t.data_mut().iter_mut().for_each(|v| *v = v.clamp(0.0, 6.0)),
        Activation::Sigmoid => t
            .data_mut()
            .iter_mut()
            .for_each(|v| *v = 1.0 / (1.0 + (-*v).exp())),
        Activation::Softmax => {
            if t.shape().len() != 1 {
                return Err(shape_err(
                    "softmax",
                    format!("softmax needs a vector, got {:?}", t.shape()),
                ));
            }
            softmax_in_place(t.data_mut());
        }
    }
    Ok(())
}

fn softmax_in_place(v: &mut [f32]) {
    let max = v.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// `W x + b` with `W` stored as `(out, in)`.
pub fn fully_connected(input: &[f32], weight: &Tensor, bias: &[f32]) -> Result<Vec<f32>> {
    let (n_out, n_in) = match weight.shape()[..] {
        [o, i] => (o, i),
        _ => {
            return Err(shape_err(
                "fully_connected",
                format!("weight must be rank 2, got {:?}", weight.shape()),
            ))
        }
    };
    if n_in != input.len() || n_out != bias.len() {
        return Err(shape_err(
            "fully_connected",
            format!(
                "weight {:?} with bias {} does not fit input of {}",
                weight.shape(),
                bias.len(),
                input.len()
            ),
        ));
    }
    Ok(weight
        .data()
        .chunks_exact(n_in)
        .zip(bias)
        .map(|(row, &b)| b + dot(row, input))
        .collect())
}

/// Dot product with eight independent accumulators so it vectorises.
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f32 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    acc.iter().sum::<f32>() + tail
}

/// Mean over the spatial dimensions: `(C, H, W) -> (C,)`.
pub fn global_average_pool(input: &Tensor) -> Result<Vec<f32>> {
    let (c, h, w) = input.chw().ok_or_else(|| {
        shape_err(
            "global_average_pool",
            format!("input must be rank 3, got {:?}", input.shape()),
        )
    })?;
    let n = (h * w) as f32;
    Ok(input.data()[..c * h * w]
        .chunks_exact(h * w)
        .map(|p| p.iter().sum::<f32>() / n)
        .collect())
}

/// Weights of one inverted residual bottleneck.
#[derive(Debug, Clone, Copy)]
pub struct BottleneckParams<'a> {
    pub expand_weight: &'a Tensor,
    pub expand_bias: &'a [f32],
    pub depthwise_weight: &'a Tensor,
    pub depthwise_bias: &'a [f32],
    pub project_weight: &'a Tensor,
    pub project_bias: &'a [f32],
}

/// Pointwise expand (relu6), 3x3 depthwise (relu6), linear pointwise
/// projection, and a skip connection when stride is 1 and channels match.
pub fn inverted_residual(
    input: &Tensor,
    params: &BottleneckParams<'_>,
    stride: usize,
    expand: usize,
) -> Result<Tensor> {
    let (c_in, _, _) = input.chw().ok_or_else(|| {
        shape_err(
            "inverted_residual",
            format!("input must be rank 3, got {:?}", input.shape()),
        )
    })?;
    let hidden = c_in * expand;
    if params.expand_weight.shape() != [hidden, c_in, 1, 1] {
        return Err(shape_err(
            "inverted_residual",
            format!(
                "expand weight {:?} does not match {c_in} -> {hidden}",
                params.expand_weight.shape()
            ),
        ));
    }
    let mut x = conv2d(input, params.expand_weight, params.expand_bias, 1, 0)?;
    activate_in_place(&mut x, Activation::Relu6)?;
    let mut x = depthwise_conv2d(
        &x,
        params.depthwise_weight,
        params.depthwise_bias,
        stride,
        1,
    )?;
    activate_in_place(&mut x, Activation::Relu6)?;
    let mut y = conv2d(&x, params.project_weight, params.project_bias, 1, 0)?;
    if stride == 1 && y.shape() == input.shape() {
        for (o, &i) in y.data_mut().iter_mut().zip(input.data()) {
            *o += i;
        }
    }
    Ok(y)
}
