use rand::Rng;
use rayon::prelude::*;

use crate::error::{NnError, Result};
use crate::init;
use crate::module::{join, Mode, Module, Param, Slot};
use crate::tensor::Tensor;

/// 2-D cross-correlation over NCHW input (no kernel flip).
///
/// Lowered to one GEMM per sample via im2col; the column buffer is rebuilt in
/// `backward` instead of being cached, which keeps memory at one input copy per layer.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub weight: Param,
    pub bias: Option<Param>,
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    cache: Option<Tensor>,
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    kh: usize,
    kw: usize,
    sh: usize,
    sw: usize,
    ph: usize,
    pw: usize,
    ho: usize,
    wo: usize,
}

impl Geometry {
    fn k(&self) -> usize {
        self.c_in * self.kh * self.kw
    }

    fn p(&self) -> usize {
        self.ho * self.wo
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.sh == 1 && self.sw == 1 && self.ph == 0 && self.pw == 0
    }
}

/// Output length of a convolution along one axis: floor((n + 2p - k) / s) + 1.
pub fn conv_out_len(n: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    if stride == 0 || n + 2 * pad < kernel {
        return None;
    }
    Some((n + 2 * pad - kernel) / stride + 1)
}

impl Conv2d {
    /// Kaiming-uniform (fan-in) weights, zero bias.
    pub fn new<R: Rng + ?Sized>(
        c_in: usize,
        c_out: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let shape = [c_out, c_in, kernel.0, kernel.1];
        let weight = init::kaiming_uniform(&shape, c_in * kernel.0 * kernel.1, rng);
        Self::from_weight(weight, bias.then(|| Tensor::zeros(&[c_out])), stride, padding)
    }

    pub fn from_weight(
        weight: Tensor,
        bias: Option<Tensor>,
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> Self {
        Self {
            weight: Param::new(weight, true),
            bias: bias.map(|b| Param::new(b, false)),
            stride,
            padding,
            cache: None,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn kernel(&self) -> (usize, usize) {
        let s = self.weight.value.shape();
        (s[2], s[3])
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let g = self.geometry(input)?;
        Ok(vec![input[0], g.c_out, g.ho, g.wo])
    }

    fn geometry(&self, input: &[usize]) -> Result<Geometry> {
        if input.len() != 4 {
            return Err(NnError::ShapeMismatch(format!(
                "conv2d expects NCHW input, got {input:?}"
            )));
        }
        let ws = self.weight.value.shape();
        let (c_out, c_in, kh, kw) = (ws[0], ws[1], ws[2], ws[3]);
        if input[1] != c_in {
            return Err(NnError::ShapeMismatch(format!(
                "conv2d expects {c_in} input channels, got {}",
                input[1]
            )));
        }
        let (sh, sw) = self.stride;
        let (ph, pw) = self.padding;
        let ho = conv_out_len(input[2], kh, sh, ph);
        let wo = conv_out_len(input[3], kw, sw, pw);
        match (ho, wo) {
            (Some(ho), Some(wo)) => Ok(Geometry {
                c_in,
                h: input[2],
                w: input[3],
                c_out,
                kh,
                kw,
                sh,
                sw,
                ph,
                pw,
                ho,
                wo,
            }),
            _ => Err(NnError::ShapeMismatch(format!(
                "input {input:?} smaller than kernel {kh}x{kw} after padding"
            ))),
        }
    }
}

fn im2col(g: &Geometry, x: &[f64], col: &mut [f64]) {
    let p = g.p();
    for c in 0..g.c_in {
        let plane = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = &mut col[((c * g.kh + i) * g.kw + j) * p..][..p];
                for oh in 0..g.ho {
                    let ih = (oh * g.sh + i) as isize - g.ph as isize;
                    let dst = &mut row[oh * g.wo..(oh + 1) * g.wo];
                    if ih < 0 || ih as usize >= g.h {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[ih as usize * g.w..(ih as usize + 1) * g.w];
                    for (ow, d) in dst.iter_mut().enumerate() {
                        let iw = (ow * g.sw + j) as isize - g.pw as isize;
                        *d = if iw < 0 || iw as usize >= g.w {
                            0.0
                        } else {
                            src[iw as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im(g: &Geometry, col: &[f64], dx: &mut [f64]) {
    let p = g.p();
    for c in 0..g.c_in {
        let plane = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = &col[((c * g.kh + i) * g.kw + j) * p..][..p];
                for oh in 0..g.ho {
                    let ih = (oh * g.sh + i) as isize - g.ph as isize;
                    if ih < 0 || ih as usize >= g.h {
                        continue;
                    }
                    let dst = &mut plane[ih as usize * g.w..(ih as usize + 1) * g.w];
                    for ow in 0..g.wo {
                        let iw = (ow * g.sw + j) as isize - g.pw as isize;
                        if iw >= 0 && (iw as usize) < g.w {
                            dst[iw as usize] += row[oh * g.wo + ow];
                        }
                    }
                }
            }
        }
    }
}

/// Row-major C[m×n] = alpha·A[m×k]·B[k×n] + beta·C with explicit strides for A and B.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: callers pass slices sized for the given dimensions and strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Module for Conv2d {
    fn forward(&mut self, input: &Tensor, _mode: Mode) -> Result<Tensor> {
        let g = self.geometry(input.shape())?;
        let n = input.shape()[0];
        let (k, p) = (g.k(), g.p());
        let in_len = g.c_in * g.h * g.w;
        let w = self.weight.value.data();
        let bias = self.bias.as_ref().map(|b| b.value.data());
        let mut out = vec![0.0; n * g.c_out * p];
        out.par_chunks_mut(g.c_out * p)
            .zip(input.data().par_chunks(in_len))
            .for_each(|(y, x)| {
                if g.is_pointwise() {
                    gemm(g.c_out, k, p, w, (k as isize, 1), x, (p as isize, 1), 0.0, y);
                } else {
                    let mut col = vec![0.0; k * p];
                    im2col(&g, x, &mut col);
                    gemm(g.c_out, k, p, w, (k as isize, 1), &col, (p as isize, 1), 0.0, y);
                }
                if let Some(b) = bias {
                    for (row, bv) in y.chunks_mut(p).zip(b) {
                        row.iter_mut().for_each(|v| *v += bv);
                    }
                }
            });
        self.cache = Some(input.clone());
        Tensor::new(&[n, g.c_out, g.ho, g.wo], out)?.check_finite("conv2d")
    }

    fn backward(&mut self, grad_output: &Tensor) -> Result<Tensor> {
        let input = self.cache.as_ref().ok_or(NnError::NoForwardCache("conv2d"))?;
        let g = self.geometry(input.shape())?;
        let n = input.shape()[0];
        let (k, p) = (g.k(), g.p());
        if grad_output.shape() != [n, g.c_out, g.ho, g.wo] {
            return Err(NnError::ShapeMismatch(format!(
                "conv2d grad {:?} does not match output [{n}, {}, {}, {}]",
                grad_output.shape(),
                g.c_out,
                g.ho,
                g.wo
            )));
        }
        let in_len = g.c_in * g.h * g.w;
        let out_len = g.c_out * p;
        let dy_all = grad_output.data();

        // Weight and bias gradients accumulate in sample order.
        {
            let dw = self.weight.value.grad_mut();
            let mut col = vec![0.0; if g.is_pointwise() { 0 } else { k * p }];
            for (x, dy) in input.data().chunks(in_len).zip(dy_all.chunks(out_len)) {
                let colref: &[f64] = if g.is_pointwise() {
                    x
                } else {
                    im2col(&g, x, &mut col);
                    &col
                };
                gemm(g.c_out, p, k, dy, (p as isize, 1), colref, (1, p as isize), 1.0, dw);
            }
        }
        if let Some(b) = self.bias.as_mut() {
            let db = b.value.grad_mut();
            for dy in dy_all.chunks(out_len) {
                for (d, row) in db.iter_mut().zip(dy.chunks(p)) {
                    *d += row.iter().sum::<f64>();
                }
            }
        }

        let w = self.weight.value.data();
        let mut dx = vec![0.0; n * in_len];
        dx.par_chunks_mut(in_len)
            .zip(dy_all.par_chunks(out_len))
            .for_each(|(dxn, dy)| {
                if g.is_pointwise() {
                    gemm(k, g.c_out, p, w, (1, k as isize), dy, (p as isize, 1), 0.0, dxn);
                } else {
                    let mut dcol = vec![0.0; k * p];
                    gemm(k, g.c_out, p, w, (1, k as isize), dy, (p as isize, 1), 0.0, &mut dcol);
                    col2im(&g, &dcol, dxn);
                }
            });
        Tensor::new(input.shape(), dx)
    }

    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        f(&join(prefix, "weight"), Slot::Param(&mut self.weight));
        if let Some(b) = self.bias.as_mut() {
            f(&join(prefix, "bias"), Slot::Param(b));
        }
    }
}
