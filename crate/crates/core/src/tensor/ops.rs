use super::{conv::out_dim, Shape4, Tensor4};
use crate::error::{Error, Result};

#[inline]
pub fn silu_scalar(v: f32) -> f32 {
    v / (1.0 + (-v).exp())
}

/// Elementwise `v · sigmoid(v)`.
pub fn silu(x: &Tensor4) -> Tensor4 {
    let mut y = x.clone();
    silu_in_place(&mut y);
    y
}

pub(crate) fn silu_in_place(x: &mut Tensor4) {
    for v in x.data_mut() {
        *v = silu_scalar(*v);
    }
}

/// Window maximum; padded cells are `-inf` so they never win.
pub fn maxpool2d(x: &Tensor4, kernel: usize, stride: usize, padding: usize) -> Result<Tensor4> {
    const OP: &str = "maxpool2d";
    if kernel == 0 || stride == 0 {
        return Err(Error::config(OP, "kernel and stride must be at least 1"));
    }
    if padding > kernel / 2 {
        return Err(Error::config(
            OP,
            format!(
                "padding {padding} exceeds half the kernel {kernel}; windows could be all padding"
            ),
        ));
    }
    let window_err = || {
        Error::config(
            OP,
            format!(
                "window {kernel} larger than padded input {}x{}",
                x.h() + 2 * padding,
                x.w() + 2 * padding
            ),
        )
    };
    let oh = out_dim(x.h(), kernel, stride, padding).ok_or_else(window_err)?;
    let ow = out_dim(x.w(), kernel, stride, padding).ok_or_else(window_err)?;
    let os = Shape4::new(x.n(), x.c(), oh, ow);
    let (h, w) = (x.h() as isize, x.w() as isize);
    let pad = padding as isize;
    let mut out = Vec::with_capacity(os.numel());
    for plane in x.data().chunks(x.h() * x.w()) {
        for oy in 0..oh {
            let y0 = (oy * stride) as isize - pad;
            let (ylo, yhi) = (y0.max(0), (y0 + kernel as isize).min(h));
            for ox in 0..ow {
                let x0 = (ox * stride) as isize - pad;
                let (xlo, xhi) = (x0.max(0), (x0 + kernel as isize).min(w));
                let mut m = f32::NEG_INFINITY;
                for iy in ylo..yhi {
                    let row = &plane[(iy * w) as usize..((iy + 1) * w) as usize];
                    for &v in &row[xlo as usize..xhi as usize] {
                        m = m.max(v);
                    }
                }
                out.push(m);
            }
        }
    }
    Ok(Tensor4::from_parts_unchecked(os, out))
}

/// Nearest-neighbour upsampling by an integer factor.
pub fn upsample_nearest(x: &Tensor4, factor: usize) -> Result<Tensor4> {
    if factor == 0 {
        return Err(Error::config(
            "upsample_nearest",
            "factor must be at least 1",
        ));
    }
    if factor == 1 {
        return Ok(x.clone());
    }
    let os = Shape4::new(x.n(), x.c(), x.h() * factor, x.w() * factor);
    let mut out = Vec::with_capacity(os.numel());
    let mut row = Vec::with_capacity(os.w);
    for plane in x.data().chunks(x.h() * x.w()) {
        for src in plane.chunks(x.w()) {
            row.clear();
            for &v in src {
                row.extend(std::iter::repeat_n(v, factor));
            }
            for _ in 0..factor {
                out.extend_from_slice(&row);
            }
        }
    }
    Ok(Tensor4::from_parts_unchecked(os, out))
}

/// Concatenates along channels, preserving part order.
pub fn concat_channels(parts: &[&Tensor4]) -> Result<Tensor4> {
    const OP: &str = "concat_channels";
    let first = parts
        .first()
        .ok_or_else(|| Error::config(OP, "at least one tensor is required"))?;
    let mut c = 0;
    for p in parts {
        for (dim, a, b) in [
            ("batch", first.n(), p.n()),
            ("height", first.h(), p.h()),
            ("width", first.w(), p.w()),
        ] {
            if a != b {
                return Err(Error::Shape {
                    op: OP,
                    dim,
                    expected: a,
                    found: b,
                });
            }
        }
        c += p.c();
    }
    let os = first.shape().with_channels(c);
    let mut out = Vec::with_capacity(os.numel());
    for n in 0..os.n {
        for p in parts {
            out.extend_from_slice(p.image(n));
        }
    }
    Ok(Tensor4::from_parts_unchecked(os, out))
}

/// Inverse of [`concat_channels`]: slices `x` into consecutive channel groups of the given sizes.
pub fn split_channels(x: &Tensor4, sizes: &[usize]) -> Result<Vec<Tensor4>> {
    let total: usize = sizes.iter().sum();
    if total != x.c() {
        return Err(Error::Shape {
            op: "split_channels",
            dim: "channel total",
            expected: x.c(),
            found: total,
        });
    }
    if sizes.contains(&0) {
        return Err(Error::config(
            "split_channels",
            "split sizes must be at least 1",
        ));
    }
    let plane = x.h() * x.w();
    let mut parts: Vec<Vec<f32>> = sizes
        .iter()
        .map(|s| Vec::with_capacity(s * plane * x.n()))
        .collect();
    for n in 0..x.n() {
        let img = x.image(n);
        let mut off = 0;
        for (s, dst) in sizes.iter().zip(parts.iter_mut()) {
            dst.extend_from_slice(&img[off * plane..(off + s) * plane]);
            off += s;
        }
    }
    Ok(sizes
        .iter()
        .zip(parts)
        .map(|(&c, d)| Tensor4::from_parts_unchecked(x.shape().with_channels(c), d))
        .collect())
}

/// Elementwise sum of two tensors with identical shape.
pub fn add(a: &Tensor4, b: &Tensor4) -> Result<Tensor4> {
    if a.shape() != b.shape() {
        return Err(Error::config(
            "add",
            format!("shape {} does not match {}", a.shape(), b.shape()),
        ));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    Ok(Tensor4::from_parts_unchecked(a.shape(), data))
}
