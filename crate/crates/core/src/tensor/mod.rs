//! Dense NCHW tensors and the numeric kernels the network blocks are built from.
//!
//! Every kernel is a pure function of its inputs. The `*_naive` convolution
//! is the reference every faster path is checked against.

mod conv;
mod ops;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use conv::{
    conv2d_fast, conv2d_naive, conv2d_naive_counted, depthwise_conv, out_dim, pointwise_conv,
    ConvAttrs, ConvExec, ConvParams, CountingExec, FastExec, NaiveExec,
};
pub(crate) use ops::silu_in_place;
pub use ops::{
    add, concat_channels, maxpool2d, silu, silu_scalar, split_channels, upsample_nearest,
};

/// Dimensions of a [`Tensor4`] in N, C, H, W order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Shape4 {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape4 {
    pub const fn new(n: usize, c: usize, h: usize, w: usize) -> Self {
        Self { n, c, h, w }
    }

    pub fn numel(&self) -> usize {
        self.n * self.c * self.h * self.w
    }

    pub fn with_channels(self, c: usize) -> Self {
        Self { c, ..self }
    }
}

impl fmt::Display for Shape4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.c, self.h, self.w)
    }
}

/// Row-major N→C→H→W array of `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    shape: Shape4,
    data: Vec<f32>,
}

impl Tensor4 {
    pub fn from_vec(shape: Shape4, data: Vec<f32>) -> Result<Self> {
        check_dims("Tensor4::from_vec", shape)?;
        if data.len() != shape.numel() {
            return Err(Error::Shape {
                op: "Tensor4::from_vec",
                dim: "data length",
                expected: shape.numel(),
                found: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape4) -> Result<Self> {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: Shape4, value: f32) -> Result<Self> {
        check_dims("Tensor4::full", shape)?;
        Ok(Self {
            shape,
            data: vec![value; shape.numel()],
        })
    }

    /// Uniform values in `[lo, hi)` from a seeded ChaCha stream.
    pub fn random(shape: Shape4, seed: u64, lo: f32, hi: f32) -> Result<Self> {
        check_dims("Tensor4::random", shape)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..shape.numel()).map(|_| rng.gen_range(lo..hi)).collect();
        Ok(Self { shape, data })
    }

    pub(crate) fn from_parts_unchecked(shape: Shape4, data: Vec<f32>) -> Self {
        debug_assert_eq!(shape.numel(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> Shape4 {
        self.shape
    }
    pub fn n(&self) -> usize {
        self.shape.n
    }
    pub fn c(&self) -> usize {
        self.shape.c
    }
    pub fn h(&self) -> usize {
        self.shape.h
    }
    pub fn w(&self) -> usize {
        self.shape.w
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.shape.c + c) * self.shape.h + h) * self.shape.w + w
    }

    #[inline]
    pub fn at(&self, n: usize, c: usize, h: usize, w: usize) -> f32 {
        self.data[self.index(n, c, h, w)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, h: usize, w: usize, v: f32) {
        let i = self.index(n, c, h, w);
        self.data[i] = v;
    }

    /// Contiguous `c*h*w` slice for one batch item.
    pub fn image(&self, n: usize) -> &[f32] {
        let len = self.shape.c * self.shape.h * self.shape.w;
        &self.data[n * len..(n + 1) * len]
    }

    /// Splits along the batch axis into batch-of-one tensors.
    pub fn unbatch(&self) -> Vec<Tensor4> {
        (0..self.shape.n)
            .map(|n| {
                Tensor4::from_parts_unchecked(Shape4 { n: 1, ..self.shape }, self.image(n).to_vec())
            })
            .collect()
    }

    /// Stacks tensors of identical C, H, W along the batch axis.
    pub fn stack(parts: &[Tensor4]) -> Result<Tensor4> {
        let first = parts
            .first()
            .ok_or_else(|| Error::config("Tensor4::stack", "no tensors to stack"))?;
        let mut n = 0;
        for p in parts {
            for (dim, a, b) in [
                ("channels", first.c(), p.c()),
                ("height", first.h(), p.h()),
                ("width", first.w(), p.w()),
            ] {
                if a != b {
                    return Err(Error::Shape {
                        op: "Tensor4::stack",
                        dim,
                        expected: a,
                        found: b,
                    });
                }
            }
            n += p.n();
        }
        let mut data = Vec::with_capacity(n * first.c() * first.h() * first.w());
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor4::from_parts_unchecked(
            Shape4 { n, ..first.shape },
            data,
        ))
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> f32 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }

    /// Largest `|a-b| / max(1, |b|)` across elements, `other` being the reference.
    pub fn max_rel_diff(&self, other: &Tensor4) -> f32 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
            .fold(0.0, f32::max)
    }
}

fn check_dims(op: &'static str, s: Shape4) -> Result<()> {
    for (dim, v) in [
        ("batch", s.n),
        ("channels", s.c),
        ("height", s.h),
        ("width", s.w),
    ] {
        if v == 0 {
            return Err(Error::config(op, format!("{dim} must be at least 1")));
        }
    }
    Ok(())
}
