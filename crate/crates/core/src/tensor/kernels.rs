//! Forward and backward kernels on raw buffers. Shapes are validated by the
//! graph before these are called.

use rayon::prelude::*;

use super::gemm::{matmul, Transpose};
use super::Element;

pub(crate) const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvDims {
    pub batch: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub height: usize,
    pub width: usize,
}

impl ConvDims {
    fn plane(&self) -> usize {
        self.height * self.width
    }

    fn patch(&self) -> usize {
        self.in_channels * TAPS
    }
}

/// Unrolls one sample `[cin, h, w]` into `[cin·9, h·w]` with zero padding 1.
fn im2col<T: Element>(x: &[T], d: &ConvDims, col: &mut [T]) {
    let (h, w) = (d.height, d.width);
    let hw = d.plane();
    for ci in 0..d.in_channels {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &mut col[((ci * TAPS) + ky * KERNEL + kx) * hw..][..hw];
                for y in 0..h {
                    let dst = &mut row[y * w..(y + 1) * w];
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            dst[0] = T::zero();
                            dst[1..].copy_from_slice(&src[..w - 1]);
                        }
                        1 => dst.copy_from_slice(src),
                        _ => {
                            dst[..w - 1].copy_from_slice(&src[1..]);
                            dst[w - 1] = T::zero();
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters `[cin·9, h·w]` back onto `[cin, h, w]`.
fn col2im<T: Element>(col: &[T], d: &ConvDims, x: &mut [T]) {
    let (h, w) = (d.height, d.width);
    let hw = d.plane();
    for ci in 0..d.in_channels {
        let plane = &mut x[ci * hw..(ci + 1) * hw];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &col[((ci * TAPS) + ky * KERNEL + kx) * hw..][..hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &row[y * w..(y + 1) * w];
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            for (o, &g) in dst[..w - 1].iter_mut().zip(&src[1..]) {
                                *o = *o + g;
                            }
                        }
                        1 => {
                            for (o, &g) in dst.iter_mut().zip(src) {
                                *o = *o + g;
                            }
                        }
                        _ => {
                            for (o, &g) in dst[1..].iter_mut().zip(&src[..w - 1]) {
                                *o = *o + g;
                            }
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv2d_forward<T: Element>(x: &[T], weight: &[T], bias: &[T], d: &ConvDims) -> Vec<T> {
    let hw = d.plane();
    let mut out = vec![T::zero(); d.batch * d.out_channels * hw];
    out.par_chunks_mut(d.out_channels * hw)
        .zip(x.par_chunks(d.in_channels * hw))
        .for_each(|(out_n, x_n)| {
            let mut col = vec![T::zero(); d.patch() * hw];
            im2col(x_n, d, &mut col);
            for (co, plane) in out_n.chunks_mut(hw).enumerate() {
                plane.fill(bias[co]);
            }
            matmul(
                d.out_channels,
                d.patch(),
                hw,
                weight,
                Transpose::No,
                &col,
                Transpose::No,
                out_n,
                true,
            );
        });
    out
}

pub(crate) struct ConvGrads<T> {
    pub input: Option<Vec<T>>,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

pub(crate) fn conv2d_backward<T: Element>(
    x: &[T],
    weight: &[T],
    grad_out: &[T],
    d: &ConvDims,
    need_input: bool,
) -> ConvGrads<T> {
    let hw = d.plane();
    let per_sample = |x_n: &[T], g_n: &[T], dx_n: Option<&mut [T]>| -> Vec<T> {
        let mut col = vec![T::zero(); d.patch() * hw];
        im2col(x_n, d, &mut col);
        let mut dw = vec![T::zero(); d.out_channels * d.patch()];
        matmul(
            d.out_channels,
            hw,
            d.patch(),
            g_n,
            Transpose::No,
            &col,
            Transpose::Yes,
            &mut dw,
            false,
        );
        if let Some(dx_n) = dx_n {
            matmul(
                d.patch(),
                d.out_channels,
                hw,
                weight,
                Transpose::Yes,
                g_n,
                Transpose::No,
                &mut col,
                false,
            );
            col2im(&col, d, dx_n);
        }
        dw
    };

    let mut input_grad = need_input.then(|| vec![T::zero(); x.len()]);
    let partials: Vec<Vec<T>> = match input_grad.as_mut() {
        Some(dx) => dx
            .par_chunks_mut(d.in_channels * hw)
            .zip(x.par_chunks(d.in_channels * hw))
            .zip(grad_out.par_chunks(d.out_channels * hw))
            .map(|((dx_n, x_n), g_n)| per_sample(x_n, g_n, Some(dx_n)))
            .collect(),
        None => x
            .par_chunks(d.in_channels * hw)
            .zip(grad_out.par_chunks(d.out_channels * hw))
            .map(|(x_n, g_n)| per_sample(x_n, g_n, None))
            .collect(),
    };

    // Summed in sample order so results do not depend on thread scheduling.
    let mut weight_grad = vec![T::zero(); weight.len()];
    for dw in &partials {
        for (acc, &v) in weight_grad.iter_mut().zip(dw) {
            *acc = *acc + v;
        }
    }
    let mut bias_grad = vec![T::zero(); d.out_channels];
    for g_n in grad_out.chunks(d.out_channels * hw) {
        for (co, plane) in g_n.chunks(hw).enumerate() {
            bias_grad[co] = bias_grad[co] + plane.iter().copied().sum::<T>();
        }
    }
    ConvGrads {
        input: input_grad,
        weight: weight_grad,
        bias: bias_grad,
    }
}

/// 2×2/stride-2 max pooling over `[planes, h, w]`. Returns values and the
/// flat input index of each selected element (first maximum in row-major
/// window order).
pub(crate) fn maxpool_forward<T: Element>(x: &[T], planes: usize, h: usize, w: usize) -> (Vec<T>, Vec<usize>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut argmax = Vec::with_capacity(planes * oh * ow);
    for p in 0..planes {
        let base = p * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let top = base + 2 * oy * w + 2 * ox;
                let window = [top, top + 1, top + w, top + w + 1];
                let mut best = window[0];
                for &idx in &window[1..] {
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    (out, argmax)
}

pub(crate) fn dense_forward<T: Element>(
    x: &[T],
    weight: &[T],
    bias: &[T],
    batch: usize,
    fan_in: usize,
    fan_out: usize,
) -> Vec<T> {
    let mut out = Vec::with_capacity(batch * fan_out);
    for _ in 0..batch {
        out.extend_from_slice(bias);
    }
    matmul(
        batch,
        fan_in,
        fan_out,
        x,
        Transpose::No,
        weight,
        Transpose::Yes,
        &mut out,
        true,
    );
    out
}

pub(crate) struct DenseGrads<T> {
    pub input: Option<Vec<T>>,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

pub(crate) fn dense_backward<T: Element>(
    x: &[T],
    weight: &[T],
    grad_out: &[T],
    batch: usize,
    fan_in: usize,
    fan_out: usize,
    need_input: bool,
) -> DenseGrads<T> {
    let input = need_input.then(|| {
        let mut dx = vec![T::zero(); batch * fan_in];
        matmul(
            batch,
            fan_out,
            fan_in,
            grad_out,
            Transpose::No,
            weight,
            Transpose::No,
            &mut dx,
            false,
        );
        dx
    });
    let mut dw = vec![T::zero(); fan_out * fan_in];
    matmul(
        fan_out,
        batch,
        fan_in,
        grad_out,
        Transpose::Yes,
        x,
        Transpose::No,
        &mut dw,
        false,
    );
    let mut db = vec![T::zero(); fan_out];
    for row in grad_out.chunks(fan_out) {
        for (acc, &g) in db.iter_mut().zip(row) {
            *acc = *acc + g;
        }
    }
    DenseGrads {
        input,
        weight: dw,
        bias: db,
    }
}
