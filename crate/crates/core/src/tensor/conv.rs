use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Shape4, Tensor4};
use crate::error::{Error, Result};

/// Geometry of one 2-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvAttrs {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub groups: usize,
}

impl ConvAttrs {
    /// Square kernel with "same" padding (`k / 2`).
    pub fn same(
        in_channels: usize,
        out_channels: usize,
        k: usize,
        stride: usize,
        groups: usize,
    ) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel_h: k,
            kernel_w: k,
            stride,
            padding: k / 2,
            groups,
        }
    }

    pub fn with_padding(self, padding: usize) -> Self {
        Self { padding, ..self }
    }

    pub fn validate(&self, op: &'static str) -> Result<()> {
        if self.groups == 0 {
            return Err(Error::config(op, "groups must be at least 1"));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::config(op, "channel counts must be at least 1"));
        }
        if !self.in_channels.is_multiple_of(self.groups) {
            return Err(Error::config(
                op,
                format!(
                    "groups={} does not divide in_channels={}",
                    self.groups, self.in_channels
                ),
            ));
        }
        if !self.out_channels.is_multiple_of(self.groups) {
            return Err(Error::config(
                op,
                format!(
                    "groups={} does not divide out_channels={}",
                    self.groups, self.out_channels
                ),
            ));
        }
        if self.stride == 0 {
            return Err(Error::config(op, "stride must be at least 1"));
        }
        if self.kernel_h == 0 || self.kernel_w == 0 {
            return Err(Error::config(op, "kernel must be at least 1x1"));
        }
        Ok(())
    }

    pub fn in_per_group(&self) -> usize {
        self.in_channels / self.groups
    }

    pub fn out_per_group(&self) -> usize {
        self.out_channels / self.groups
    }

    /// Elements of the weight array: `out * (in/groups) * kh * kw`.
    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_per_group() * self.kernel_h * self.kernel_w
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [
            self.out_channels,
            self.in_per_group(),
            self.kernel_h,
            self.kernel_w,
        ]
    }

    pub fn is_depthwise(&self) -> bool {
        self.groups == self.in_channels && self.groups == self.out_channels
    }

    pub fn is_pointwise(&self) -> bool {
        self.kernel_h == 1 && self.kernel_w == 1 && self.stride == 1 && self.padding == 0
    }

    /// Output shape for `input`, or an error when the padded input is smaller than the kernel.
    pub fn output_shape(&self, op: &'static str, input: Shape4) -> Result<Shape4> {
        if input.c != self.in_channels {
            return Err(Error::Shape {
                op,
                dim: "input channels",
                expected: self.in_channels,
                found: input.c,
            });
        }
        let h = out_dim(input.h, self.kernel_h, self.stride, self.padding).ok_or_else(|| {
            Error::config(
                op,
                format!(
                    "kernel height {} exceeds padded input height {}",
                    self.kernel_h,
                    input.h + 2 * self.padding
                ),
            )
        })?;
        let w = out_dim(input.w, self.kernel_w, self.stride, self.padding).ok_or_else(|| {
            Error::config(
                op,
                format!(
                    "kernel width {} exceeds padded input width {}",
                    self.kernel_w,
                    input.w + 2 * self.padding
                ),
            )
        })?;
        Ok(Shape4::new(input.n, self.out_channels, h, w))
    }

    /// Multiply-accumulates for one forward pass producing `out`.
    pub fn macs(&self, out: Shape4) -> u64 {
        out.numel() as u64 * (self.in_per_group() * self.kernel_h * self.kernel_w) as u64
    }
}

/// `⌊(len + 2·pad − k) / stride⌋ + 1`, or `None` if the window does not fit.
pub fn out_dim(len: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    (len + 2 * pad).checked_sub(k).map(|d| d / stride + 1)
}

/// Convolution weights plus the per-output-channel affine map applied after the sum.
///
/// Batch norm is folded into `scale`/`bias`; a plain biased convolution has `scale == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    pub attrs: ConvAttrs,
    pub weights: Vec<f32>,
    pub scale: Vec<f32>,
    pub bias: Vec<f32>,
}

impl ConvParams {
    pub fn new(
        attrs: ConvAttrs,
        weights: Vec<f32>,
        scale: Vec<f32>,
        bias: Vec<f32>,
    ) -> Result<Self> {
        const OP: &str = "ConvParams::new";
        attrs.validate(OP)?;
        if weights.len() != attrs.weight_len() {
            return Err(Error::Shape {
                op: OP,
                dim: "weights length",
                expected: attrs.weight_len(),
                found: weights.len(),
            });
        }
        for (dim, v) in [("scale length", &scale), ("bias length", &bias)] {
            if v.len() != attrs.out_channels {
                return Err(Error::Shape {
                    op: OP,
                    dim,
                    expected: attrs.out_channels,
                    found: v.len(),
                });
            }
        }
        Ok(Self {
            attrs,
            weights,
            scale,
            bias,
        })
    }

    /// Weights given, unit scale, zero bias.
    pub fn with_weights(attrs: ConvAttrs, weights: Vec<f32>) -> Result<Self> {
        let oc = attrs.out_channels;
        Self::new(attrs, weights, vec![1.0; oc], vec![0.0; oc])
    }

    pub fn zeros(attrs: ConvAttrs) -> Result<Self> {
        Self::with_weights(attrs, vec![0.0; attrs.weight_len()])
    }

    #[inline]
    fn weight(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> f32 {
        let a = &self.attrs;
        self.weights[((oc * a.in_per_group() + ic) * a.kernel_h + ky) * a.kernel_w + kx]
    }

    fn check_consistent(&self, op: &'static str) -> Result<()> {
        self.attrs.validate(op)?;
        if self.weights.len() != self.attrs.weight_len() {
            return Err(Error::Shape {
                op,
                dim: "weights length",
                expected: self.attrs.weight_len(),
                found: self.weights.len(),
            });
        }
        if self.scale.len() != self.attrs.out_channels || self.bias.len() != self.attrs.out_channels
        {
            return Err(Error::Shape {
                op,
                dim: "scale/bias length",
                expected: self.attrs.out_channels,
                found: self.scale.len().min(self.bias.len()),
            });
        }
        Ok(())
    }
}

/// Reference convolution: direct summation over every output element and every
/// kernel tap (padding taps read zero), then `scale * y + bias`.
pub fn conv2d_naive(x: &Tensor4, p: &ConvParams) -> Result<Tensor4> {
    conv2d_naive_counted(x, p).map(|(t, _)| t)
}

/// [`conv2d_naive`] that also returns how many multiplications it executed.
pub fn conv2d_naive_counted(x: &Tensor4, p: &ConvParams) -> Result<(Tensor4, u64)> {
    const OP: &str = "conv2d_naive";
    p.check_consistent(OP)?;
    let a = &p.attrs;
    let os = a.output_shape(OP, x.shape())?;
    let (icg, ocg) = (a.in_per_group(), a.out_per_group());
    let mut out = vec![0f32; os.numel()];
    let mut mults = 0u64;
    let mut idx = 0;
    for n in 0..os.n {
        for oc in 0..os.c {
            let g = oc / ocg;
            for oy in 0..os.h {
                for ox in 0..os.w {
                    let mut acc = 0f64;
                    for ic in 0..icg {
                        let c = g * icg + ic;
                        for ky in 0..a.kernel_h {
                            for kx in 0..a.kernel_w {
                                let iy = (oy * a.stride + ky) as isize - a.padding as isize;
                                let ix = (ox * a.stride + kx) as isize - a.padding as isize;
                                let v = if iy >= 0
                                    && ix >= 0
                                    && (iy as usize) < x.h()
                                    && (ix as usize) < x.w()
                                {
                                    x.at(n, c, iy as usize, ix as usize)
                                } else {
                                    0.0
                                };
                                acc += v as f64 * p.weight(oc, ic, ky, kx) as f64;
                                mults += 1;
                            }
                        }
                    }
                    out[idx] = (p.scale[oc] as f64 * acc + p.bias[oc] as f64) as f32;
                    idx += 1;
                }
            }
        }
    }
    Ok((Tensor4::from_parts_unchecked(os, out), mults))
}

/// Optimized convolution: direct kernel for depthwise, GEMM for everything else
/// (1×1 stride-1 convolutions skip the patch lowering).
pub fn conv2d_fast(x: &Tensor4, p: &ConvParams) -> Result<Tensor4> {
    conv_fast_impl(x, p, false)
}

/// Per-channel convolution; requires `groups == in_channels == out_channels`.
pub fn depthwise_conv(x: &Tensor4, p: &ConvParams) -> Result<Tensor4> {
    const OP: &str = "depthwise_conv";
    p.check_consistent(OP)?;
    let a = &p.attrs;
    if !a.is_depthwise() || a.groups != x.c() {
        return Err(Error::config(
            OP,
            format!(
                "depthwise needs groups == in == out == input channels (groups={}, in={}, out={}, input={})",
                a.groups,
                a.in_channels,
                a.out_channels,
                x.c()
            ),
        ));
    }
    let os = a.output_shape(OP, x.shape())?;
    let mut out = vec![0f32; os.numel()];
    let plane = os.h * os.w;
    for (nc, dst) in out.chunks_mut(plane).enumerate() {
        depthwise_plane(x, p, nc / os.c, nc % os.c, os, dst);
    }
    Ok(Tensor4::from_parts_unchecked(os, out))
}

/// 1×1, stride 1, unpadded, ungrouped channel mixing.
pub fn pointwise_conv(x: &Tensor4, p: &ConvParams) -> Result<Tensor4> {
    const OP: &str = "pointwise_conv";
    p.check_consistent(OP)?;
    if !p.attrs.is_pointwise() || p.attrs.groups != 1 {
        return Err(Error::config(
            OP,
            format!(
                "pointwise needs a 1x1 kernel, stride 1, padding 0, groups 1 (got {}x{}, s{}, p{}, g{})",
                p.attrs.kernel_h, p.attrs.kernel_w, p.attrs.stride, p.attrs.padding, p.attrs.groups
            ),
        ));
    }
    conv_fast_impl(x, p, false)
}

fn conv_fast_impl(x: &Tensor4, p: &ConvParams, parallel: bool) -> Result<Tensor4> {
    const OP: &str = "conv2d_fast";
    p.check_consistent(OP)?;
    let a = p.attrs;
    let os = a.output_shape(OP, x.shape())?;
    let mut out = vec![0f32; os.numel()];
    let per_image = os.c * os.h * os.w;

    if a.is_depthwise() {
        let plane = os.h * os.w;
        let run =
            |(nc, dst): (usize, &mut [f32])| depthwise_plane(x, p, nc / os.c, nc % os.c, os, dst);
        if parallel {
            out.par_chunks_mut(plane).enumerate().for_each(run);
        } else {
            out.chunks_mut(plane).enumerate().for_each(run);
        }
        return Ok(Tensor4::from_parts_unchecked(os, out));
    }

    let run =
        |(n, dst): (usize, &mut [f32])| gemm_image(x.image(n), x.shape(), p, os, dst, parallel);
    if parallel && os.n > 1 {
        out.par_chunks_mut(per_image).enumerate().for_each(run);
    } else {
        out.chunks_mut(per_image).enumerate().for_each(run);
    }
    Ok(Tensor4::from_parts_unchecked(os, out))
}

fn depthwise_plane(x: &Tensor4, p: &ConvParams, n: usize, c: usize, os: Shape4, dst: &mut [f32]) {
    let a = &p.attrs;
    let (kh, kw) = (a.kernel_h, a.kernel_w);
    let src = &x.image(n)[c * x.h() * x.w()..(c + 1) * x.h() * x.w()];
    let wts = &p.weights[c * kh * kw..(c + 1) * kh * kw];
    let (ih, iw) = (x.h() as isize, x.w() as isize);
    let pad = a.padding as isize;
    let s = a.stride as isize;
    for oy in 0..os.h {
        let y0 = oy as isize * s - pad;
        for ox in 0..os.w {
            let x0 = ox as isize * s - pad;
            let mut acc = 0f32;
            for ky in 0..kh {
                let iy = y0 + ky as isize;
                if iy < 0 || iy >= ih {
                    continue;
                }
                let row = &src[iy as usize * iw as usize..(iy as usize + 1) * iw as usize];
                let wrow = &wts[ky * kw..(ky + 1) * kw];
                for (kx, wv) in wrow.iter().enumerate() {
                    let ix = x0 + kx as isize;
                    if ix >= 0 && ix < iw {
                        acc += row[ix as usize] * wv;
                    }
                }
            }
            dst[oy * os.w + ox] = acc * p.scale[c] + p.bias[c];
        }
    }
}

/// One image: per group, `W_g [ocg × K] · cols [K × OH·OW]`, then the channel affine map.
fn gemm_image(
    src: &[f32],
    in_shape: Shape4,
    p: &ConvParams,
    os: Shape4,
    dst: &mut [f32],
    parallel: bool,
) {
    let a = &p.attrs;
    let (icg, ocg) = (a.in_per_group(), a.out_per_group());
    let k = icg * a.kernel_h * a.kernel_w;
    let npix = os.h * os.w;
    let plane_in = in_shape.h * in_shape.w;
    let direct = a.is_pointwise();
    let mut cols = if direct {
        Vec::new()
    } else {
        vec![0f32; k * npix]
    };

    for g in 0..a.groups {
        let group_src = &src[g * icg * plane_in..(g + 1) * icg * plane_in];
        let b: &[f32] = if direct {
            group_src
        } else {
            im2col(
                group_src, icg, in_shape.h, in_shape.w, a, os.h, os.w, &mut cols,
            );
            &cols
        };
        let w = &p.weights[g * ocg * k..(g + 1) * ocg * k];
        let c = &mut dst[g * ocg * npix..(g + 1) * ocg * npix];
        if parallel && ocg >= 16 {
            let rows = ocg.div_ceil(rayon::current_num_threads()).max(8);
            c.par_chunks_mut(rows * npix)
                .zip(w.par_chunks(rows * k))
                .for_each(|(cc, ww)| sgemm(cc.len() / npix, k, npix, ww, b, cc));
        } else {
            sgemm(ocg, k, npix, w, b, c);
        }
    }

    for (oc, plane) in dst.chunks_mut(npix).enumerate() {
        let (s, bias) = (p.scale[oc], p.bias[oc]);
        for v in plane {
            *v = *v * s + bias;
        }
    }
}

/// Row-major `c[m×n] = a[m×k] · b[k×n]`.
fn sgemm(m: usize, k: usize, n: usize, a: &[f32], b: &[f32], c: &mut [f32]) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    // SAFETY: the slice lengths above cover every element addressed by the
    // given dimensions and row-major strides.
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
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Lowers `channels` input planes into a `[channels·kh·kw] × [oh·ow]` patch matrix.
#[allow(clippy::too_many_arguments)]
fn im2col(
    src: &[f32],
    channels: usize,
    h: usize,
    w: usize,
    a: &ConvAttrs,
    oh: usize,
    ow: usize,
    cols: &mut [f32],
) {
    let npix = oh * ow;
    let pad = a.padding as isize;
    let s = a.stride;
    let mut row = 0;
    for c in 0..channels {
        let plane = &src[c * h * w..(c + 1) * h * w];
        for ky in 0..a.kernel_h {
            for kx in 0..a.kernel_w {
                let dst = &mut cols[row * npix..(row + 1) * npix];
                // valid output columns: 0 <= ox*s + kx - pad < w
                let ox_lo = a.padding.saturating_sub(kx).div_ceil(s).min(ow);
                let ox_hi = (w + a.padding)
                    .checked_sub(kx)
                    .map_or(0, |span| span.div_ceil(s))
                    .min(ow);
                for oy in 0..oh {
                    let d = &mut dst[oy * ow..(oy + 1) * ow];
                    let iy = (oy * s + ky) as isize - pad;
                    if iy < 0 || iy >= h as isize || ox_lo >= ox_hi {
                        d.fill(0.0);
                        continue;
                    }
                    let srow = &plane[iy as usize * w..(iy as usize + 1) * w];
                    d[..ox_lo].fill(0.0);
                    d[ox_hi..].fill(0.0);
                    let base = ox_lo * s + kx - a.padding;
                    if s == 1 {
                        d[ox_lo..ox_hi].copy_from_slice(&srow[base..base + (ox_hi - ox_lo)]);
                    } else {
                        for (i, v) in d[ox_lo..ox_hi].iter_mut().enumerate() {
                            *v = srow[base + i * s];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Strategy for executing a convolution inside a block.
pub trait ConvExec: Sync {
    fn conv(&self, x: &Tensor4, p: &ConvParams) -> Result<Tensor4>;
}

/// The optimized path. `parallel` enables deterministic intra-op threading.
#[derive(Debug, Clone, Copy, Default)]
pub struct FastExec {
    pub parallel: bool,
}

impl ConvExec for FastExec {
    fn conv(&self, x: &Tensor4, p: &ConvParams) -> Result<Tensor4> {
        conv_fast_impl(x, p, self.parallel)
    }
}

/// The reference path.
#[derive(Debug, Clone, Copy, Default)]
pub struct NaiveExec;

impl ConvExec for NaiveExec {
    fn conv(&self, x: &Tensor4, p: &ConvParams) -> Result<Tensor4> {
        conv2d_naive(x, p)
    }
}

/// Reference path that tallies every multiplication it executes.
#[derive(Debug, Default)]
pub struct CountingExec {
    mults: AtomicU64,
}

impl CountingExec {
    pub fn multiplications(&self) -> u64 {
        self.mults.load(Ordering::Relaxed)
    }
}

impl ConvExec for CountingExec {
    fn conv(&self, x: &Tensor4, p: &ConvParams) -> Result<Tensor4> {
        let (t, m) = conv2d_naive_counted(x, p)?;
        self.mults.fetch_add(m, Ordering::Relaxed);
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones(shape: Shape4) -> Tensor4 {
        Tensor4::full(shape, 1.0).unwrap()
    }

    #[test]
    fn sum_of_ones() {
        let x = ones(Shape4::new(1, 1, 3, 3));
        let p =
            ConvParams::with_weights(ConvAttrs::same(1, 1, 3, 1, 1).with_padding(0), vec![1.0; 9])
                .unwrap();
        for y in [conv2d_naive(&x, &p).unwrap(), conv2d_fast(&x, &p).unwrap()] {
            assert_eq!(y.shape(), Shape4::new(1, 1, 1, 1));
            assert_eq!(y.data(), &[9.0]);
        }
    }

    #[test]
    fn identity_kernel() {
        let x = Tensor4::random(Shape4::new(2, 3, 5, 4), 3, -2.0, 2.0).unwrap();
        let mut w = vec![0.0; 9];
        for c in 0..3 {
            w[c * 3 + c] = 1.0;
        }
        let p = ConvParams::with_weights(ConvAttrs::same(3, 3, 1, 1, 1), w).unwrap();
        assert_eq!(conv2d_naive(&x, &p).unwrap(), x);
        assert_eq!(conv2d_fast(&x, &p).unwrap(), x);
    }

    #[test]
    fn shape_arithmetic() {
        let x = Tensor4::zeros(Shape4::new(1, 16, 32, 32)).unwrap();
        let p = ConvParams::zeros(ConvAttrs::same(16, 32, 3, 1, 1)).unwrap();
        assert_eq!(
            conv2d_fast(&x, &p).unwrap().shape(),
            Shape4::new(1, 32, 32, 32)
        );
        let p = ConvParams::zeros(ConvAttrs::same(16, 8, 3, 2, 1)).unwrap();
        assert_eq!(
            conv2d_fast(&x, &p).unwrap().shape(),
            Shape4::new(1, 8, 16, 16)
        );
    }

    #[test]
    fn channel_mismatch_names_dim() {
        let x = Tensor4::zeros(Shape4::new(1, 4, 8, 8)).unwrap();
        let p = ConvParams::zeros(ConvAttrs::same(3, 8, 3, 1, 1)).unwrap();
        let err = conv2d_naive(&x, &p).unwrap_err();
        assert!(matches!(
            err,
            Error::Shape {
                dim: "input channels",
                expected: 3,
                found: 4,
                ..
            }
        ));
    }

    #[test]
    fn groups_must_divide() {
        let err = ConvParams::zeros(ConvAttrs::same(6, 8, 3, 1, 4)).unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "{err}");
    }

    #[test]
    fn kernel_larger_than_input() {
        let x = Tensor4::zeros(Shape4::new(1, 1, 2, 2)).unwrap();
        let p = ConvParams::zeros(ConvAttrs::same(1, 1, 5, 1, 1).with_padding(0)).unwrap();
        assert!(conv2d_fast(&x, &p).is_err());
    }

    #[test]
    fn depthwise_per_channel_sums() {
        let x = ones(Shape4::new(1, 2, 3, 3));
        let p = ConvParams::with_weights(
            ConvAttrs::same(2, 2, 3, 1, 2).with_padding(0),
            vec![1.0; 18],
        )
        .unwrap();
        assert_eq!(depthwise_conv(&x, &p).unwrap().data(), &[9.0, 9.0]);
    }

    #[test]
    fn depthwise_same_padding_shape() {
        let x = Tensor4::zeros(Shape4::new(1, 4, 8, 8)).unwrap();
        let p = ConvParams::zeros(ConvAttrs::same(4, 4, 5, 1, 4)).unwrap();
        assert_eq!(
            depthwise_conv(&x, &p).unwrap().shape(),
            Shape4::new(1, 4, 8, 8)
        );
    }

    #[test]
    fn depthwise_rejects_dense_params() {
        let x = Tensor4::zeros(Shape4::new(1, 4, 8, 8)).unwrap();
        let p = ConvParams::zeros(ConvAttrs::same(4, 4, 3, 1, 1)).unwrap();
        assert!(matches!(depthwise_conv(&x, &p), Err(Error::Config { .. })));
    }

    #[test]
    fn pointwise_dot_product() {
        let mut x = Tensor4::zeros(Shape4::new(1, 2, 1, 1)).unwrap();
        x.data_mut().copy_from_slice(&[3.0, 4.0]);
        let p = ConvParams::with_weights(ConvAttrs::same(2, 1, 1, 1, 1), vec![1.0, 1.0]).unwrap();
        assert_eq!(pointwise_conv(&x, &p).unwrap().data(), &[7.0]);
    }

    #[test]
    fn pointwise_bias_only() {
        let x = Tensor4::random(Shape4::new(1, 3, 4, 4), 5, -1.0, 1.0).unwrap();
        let a = ConvAttrs::same(3, 2, 1, 1, 1);
        let p = ConvParams::new(a, vec![0.0; 6], vec![1.0; 2], vec![5.0; 2]).unwrap();
        assert!(pointwise_conv(&x, &p)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 5.0));
    }

    #[test]
    fn pointwise_rejects_3x3() {
        let x = Tensor4::zeros(Shape4::new(1, 2, 4, 4)).unwrap();
        let p = ConvParams::zeros(ConvAttrs::same(2, 2, 3, 1, 1)).unwrap();
        assert!(matches!(pointwise_conv(&x, &p), Err(Error::Config { .. })));
    }

    #[test]
    fn counted_multiplications_match_formula() {
        let x = Tensor4::random(Shape4::new(1, 8, 7, 9), 1, -1.0, 1.0).unwrap();
        let a = ConvAttrs::same(8, 4, 3, 2, 2);
        let p = ConvParams::zeros(a).unwrap();
        let (y, m) = conv2d_naive_counted(&x, &p).unwrap();
        assert_eq!(m, a.macs(y.shape()));
    }

    #[test]
    fn parallel_path_is_bitwise_serial() {
        let x = Tensor4::random(Shape4::new(2, 8, 12, 12), 2, -1.0, 1.0).unwrap();
        let a = ConvAttrs::same(8, 64, 3, 1, 1);
        let w = Tensor4::random(Shape4::new(64, 8, 3, 3), 4, -0.3, 0.3)
            .unwrap()
            .into_vec();
        let p = ConvParams::with_weights(a, w).unwrap();
        let serial = FastExec { parallel: false }.conv(&x, &p).unwrap();
        let par = FastExec { parallel: true }.conv(&x, &p).unwrap();
        assert_eq!(serial, par);
    }
}
