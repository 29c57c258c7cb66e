//! Composite network blocks: Conv(+folded norm+SiLU), depthwise-separable,
//! Ghost and Phantom convolutions, C2f/C2fi, SPPF and the decoupled detect head.
//!
//! Every block owns its [`Conv`] units and can report them by name, which is how
//! weights are (de)serialized and how parameters are counted.

mod csp;
mod head;
mod separable;
mod spec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{
    concat_channels, silu_in_place, upsample_nearest, ConvAttrs, ConvExec, ConvParams, Shape4,
    Tensor4,
};

pub use csp::{Bottleneck, C2f, Sppf};
pub use head::{DetectHead, DetectOutput, DETECT_STRIDES};
pub use separable::{DwSeparable, GhostConv, PhantomConv};
pub use spec::{
    BlockKind, BlockSpec, C2fArgs, C2fiArgs, ConcatArgs, ConvArgs, DetectArgs, DwSeparableArgs,
    GhostArgs, PhantomArgs, SppfArgs, UpsampleArgs,
};

/// Weight initializer: all zeros, or `uniform(-1/√fan_in, 1/√fan_in)` from a seeded stream.
pub struct Init {
    rng: Option<ChaCha8Rng>,
}

impl Init {
    pub fn zeros() -> Self {
        Self { rng: None }
    }

    pub fn seeded(seed: u64) -> Self {
        Self {
            rng: Some(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn is_random(&self) -> bool {
        self.rng.is_some()
    }

    fn uniform(&mut self, len: usize, bound: f32) -> Vec<f32> {
        match &mut self.rng {
            Some(rng) => (0..len).map(|_| rng.gen_range(-bound..=bound)).collect(),
            None => vec![0.0; len],
        }
    }

    fn params(&mut self, attrs: ConvAttrs) -> Result<ConvParams> {
        let fan_in = attrs.in_per_group() * attrs.kernel_h * attrs.kernel_w;
        let bound = (1.0 / fan_in as f32).sqrt();
        let weights = self.uniform(attrs.weight_len(), bound);
        let bias = self.uniform(attrs.out_channels, bound);
        ConvParams::new(attrs, weights, vec![1.0; attrs.out_channels], bias)
    }
}

/// One convolution followed by its per-channel affine map and, optionally, SiLU.
///
/// `norm` marks a folded batch norm (learned scale and bias); a plain conv only
/// carries a bias and its scale stays 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv {
    pub params: ConvParams,
    pub norm: bool,
    pub act: bool,
}

impl Conv {
    /// Conv + folded norm + SiLU with same padding.
    pub fn new(
        in_c: usize,
        out_c: usize,
        k: usize,
        s: usize,
        groups: usize,
        init: &mut Init,
    ) -> Result<Self> {
        let attrs = ConvAttrs::same(in_c, out_c, k, s, groups);
        attrs.validate("conv_block")?;
        Ok(Self {
            params: init.params(attrs)?,
            norm: true,
            act: true,
        })
    }

    /// Biased convolution without norm or activation (detect-head outputs).
    pub fn plain(in_c: usize, out_c: usize, k: usize, init: &mut Init) -> Result<Self> {
        let attrs = ConvAttrs::same(in_c, out_c, k, 1, 1);
        attrs.validate("conv")?;
        let params = init.params(attrs)?;
        Ok(Self {
            params,
            norm: false,
            act: false,
        })
    }

    pub fn attrs(&self) -> &ConvAttrs {
        &self.params.attrs
    }

    pub fn out_channels(&self) -> usize {
        self.params.attrs.out_channels
    }

    pub fn forward(&self, x: &Tensor4, exec: &dyn ConvExec) -> Result<Tensor4> {
        let mut y = exec.conv(x, &self.params)?;
        if self.act {
            silu_in_place(&mut y);
        }
        Ok(y)
    }

    /// Learnable values: weights plus `2·out_c` for a folded norm, `out_c` for a bare bias.
    pub fn param_count(&self) -> u64 {
        let oc = self.out_channels() as u64;
        self.params.weights.len() as u64 + if self.norm { 2 * oc } else { oc }
    }

    /// Output shape and multiply-accumulates for `input`.
    pub fn trace(&self, input: Shape4) -> Result<(Shape4, u64)> {
        let out = self.attrs().output_shape("conv", input)?;
        Ok((out, self.attrs().macs(out)))
    }
}

/// Named view of every conv unit inside a block, in a fixed order.
pub trait ConvUnits {
    fn convs(&self) -> Vec<(String, &Conv)>;
    fn convs_mut(&mut self) -> Vec<(String, &mut Conv)>;

    fn param_count(&self) -> u64 {
        self.convs().iter().map(|(_, c)| c.param_count()).sum()
    }
}

impl ConvUnits for Conv {
    fn convs(&self) -> Vec<(String, &Conv)> {
        vec![("conv".into(), self)]
    }
    fn convs_mut(&mut self) -> Vec<(String, &mut Conv)> {
        vec![("conv".into(), self)]
    }
}

pub(crate) fn prefixed<'a>(
    prefix: &str,
    units: Vec<(String, &'a Conv)>,
) -> impl Iterator<Item = (String, &'a Conv)> + 'a {
    let prefix = prefix.to_string();
    units
        .into_iter()
        .map(move |(n, c)| (format!("{prefix}.{n}"), c))
}

pub(crate) fn prefixed_mut<'a>(
    prefix: &str,
    units: Vec<(String, &'a mut Conv)>,
) -> impl Iterator<Item = (String, &'a mut Conv)> + 'a {
    let prefix = prefix.to_string();
    units
        .into_iter()
        .map(move |(n, c)| (format!("{prefix}.{n}"), c))
}

/// A block bound to concrete input channels and weights.
#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Conv(Conv),
    DwSeparable(DwSeparable),
    Ghost(GhostConv),
    Phantom(PhantomConv),
    C2f(C2f),
    Sppf(Sppf),
    Upsample(usize),
    Concat,
    Detect(DetectHead),
}

impl Block {
    /// Instantiates `spec` for inputs with the given channel counts.
    pub fn build(
        spec: &BlockSpec,
        repeats: usize,
        in_channels: &[usize],
        num_classes: usize,
        init: &mut Init,
    ) -> Result<Block> {
        let single = || -> Result<usize> {
            match in_channels {
                [c] => Ok(*c),
                _ => Err(Error::config(
                    "Block::build",
                    format!(
                        "{} takes exactly one input, got {}",
                        spec.kind(),
                        in_channels.len()
                    ),
                )),
            }
        };
        Ok(match spec {
            BlockSpec::Conv(a) => {
                Block::Conv(Conv::new(single()?, a.out_c, a.k, a.s, a.groups, init)?)
            }
            BlockSpec::DWSeparable(a) => {
                Block::DwSeparable(DwSeparable::new(single()?, a.out_c, a.k, a.s, init)?)
            }
            BlockSpec::GhostConv(a) => {
                Block::Ghost(GhostConv::new(single()?, a.out_c, a.k, a.s, init)?)
            }
            BlockSpec::PhantomConv(a) => Block::Phantom(PhantomConv::with_options(
                single()?,
                a.out_c,
                a.s,
                a.groups,
                a.k,
                a.cheap_k,
                init,
            )?),
            BlockSpec::C2f(a) => Block::C2f(C2f::with_hidden(
                single()?,
                a.out_c,
                a.hidden.unwrap_or(a.out_c / 2),
                repeats,
                a.shortcut,
                init,
            )?),
            BlockSpec::C2fi(a) => Block::C2f(C2f::with_hidden(
                single()?,
                a.out_c,
                a.hidden.unwrap_or(a.out_c / 2),
                repeats,
                false,
                init,
            )?),
            BlockSpec::SPPF(a) => Block::Sppf(Sppf::new(single()?, a.out_c, a.k, init)?),
            BlockSpec::Upsample(a) => {
                single()?;
                if a.factor == 0 {
                    return Err(Error::config("Upsample", "factor must be at least 1"));
                }
                Block::Upsample(a.factor)
            }
            BlockSpec::Concat(_) => Block::Concat,
            BlockSpec::Detect(a) => {
                Block::Detect(DetectHead::new(in_channels, num_classes, a.reg_max, init)?)
            }
        })
    }

    /// Runs a non-detect block.
    pub fn forward(&self, inputs: &[&Tensor4], exec: &dyn ConvExec) -> Result<Tensor4> {
        let one = || -> Result<&Tensor4> {
            match inputs {
                [x] => Ok(*x),
                _ => Err(Error::config(
                    "Block::forward",
                    format!("expected one input, got {}", inputs.len()),
                )),
            }
        };
        match self {
            Block::Conv(c) => c.forward(one()?, exec),
            Block::DwSeparable(b) => b.forward(one()?, exec),
            Block::Ghost(b) => b.forward(one()?, exec),
            Block::Phantom(b) => b.forward(one()?, exec),
            Block::C2f(b) => b.forward(one()?, exec),
            Block::Sppf(b) => b.forward(one()?, exec),
            Block::Upsample(f) => upsample_nearest(one()?, *f),
            Block::Concat => concat_channels(inputs),
            Block::Detect(_) => Err(Error::config(
                "Block::forward",
                "detect heads produce a DetectOutput; call DetectHead::forward",
            )),
        }
    }

    /// Output shape and multiply-accumulates for inputs of the given shapes.
    pub fn trace(&self, inputs: &[Shape4]) -> Result<(Vec<Shape4>, u64)> {
        let one = || -> Result<Shape4> {
            match inputs {
                [s] => Ok(*s),
                _ => Err(Error::config(
                    "Block::trace",
                    format!("expected one input, got {}", inputs.len()),
                )),
            }
        };
        let single = |r: Result<(Shape4, u64)>| r.map(|(s, m)| (vec![s], m));
        match self {
            Block::Conv(c) => single(c.trace(one()?)),
            Block::DwSeparable(b) => single(b.trace(one()?)),
            Block::Ghost(b) => single(b.trace(one()?)),
            Block::Phantom(b) => single(b.trace(one()?)),
            Block::C2f(b) => single(b.trace(one()?)),
            Block::Sppf(b) => single(b.trace(one()?)),
            Block::Upsample(f) => {
                let s = one()?;
                Ok((vec![Shape4::new(s.n, s.c, s.h * f, s.w * f)], 0))
            }
            Block::Concat => {
                let first = inputs
                    .first()
                    .ok_or_else(|| Error::config("Concat", "no inputs"))?;
                for s in inputs {
                    if (s.n, s.h, s.w) != (first.n, first.h, first.w) {
                        return Err(Error::config(
                            "Concat",
                            format!("spatial mismatch {} vs {}", first, s),
                        ));
                    }
                }
                Ok((
                    vec![first.with_channels(inputs.iter().map(|s| s.c).sum())],
                    0,
                ))
            }
            Block::Detect(h) => h.trace(inputs),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Block::Conv(_) => "Conv",
            Block::DwSeparable(_) => "DWSeparable",
            Block::Ghost(_) => "GhostConv",
            Block::Phantom(_) => "PhantomConv",
            Block::C2f(_) => "C2f",
            Block::Sppf(_) => "SPPF",
            Block::Upsample(_) => "Upsample",
            Block::Concat => "Concat",
            Block::Detect(_) => "Detect",
        }
    }
}

impl ConvUnits for Block {
    fn convs(&self) -> Vec<(String, &Conv)> {
        match self {
            Block::Conv(c) => c.convs(),
            Block::DwSeparable(b) => b.convs(),
            Block::Ghost(b) => b.convs(),
            Block::Phantom(b) => b.convs(),
            Block::C2f(b) => b.convs(),
            Block::Sppf(b) => b.convs(),
            Block::Detect(b) => b.convs(),
            Block::Upsample(_) | Block::Concat => Vec::new(),
        }
    }

    fn convs_mut(&mut self) -> Vec<(String, &mut Conv)> {
        match self {
            Block::Conv(c) => c.convs_mut(),
            Block::DwSeparable(b) => b.convs_mut(),
            Block::Ghost(b) => b.convs_mut(),
            Block::Phantom(b) => b.convs_mut(),
            Block::C2f(b) => b.convs_mut(),
            Block::Sppf(b) => b.convs_mut(),
            Block::Detect(b) => b.convs_mut(),
            Block::Upsample(_) | Block::Concat => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{conv2d_naive, silu, FastExec};

    #[test]
    fn conv_block_shape_1x1() {
        let c = Conv::new(8, 5, 1, 1, 1, &mut Init::seeded(1)).unwrap();
        let x = Tensor4::random(Shape4::new(1, 8, 4, 4), 2, -1.0, 1.0).unwrap();
        assert_eq!(
            c.forward(&x, &FastExec::default()).unwrap().shape(),
            Shape4::new(1, 5, 4, 4)
        );
    }

    #[test]
    fn conv_block_zero_weights_give_zero() {
        let c = Conv::new(4, 6, 3, 1, 1, &mut Init::zeros()).unwrap();
        let x = Tensor4::random(Shape4::new(1, 4, 5, 5), 2, -3.0, 3.0).unwrap();
        assert!(c
            .forward(&x, &FastExec::default())
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn conv_block_matches_naive_then_silu() {
        let c = Conv::new(6, 8, 3, 2, 2, &mut Init::seeded(7)).unwrap();
        let x = Tensor4::random(Shape4::new(2, 6, 9, 7), 3, -1.0, 1.0).unwrap();
        let want = silu(&conv2d_naive(&x, &c.params).unwrap());
        let got = c.forward(&x, &FastExec::default()).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-5);
    }

    #[test]
    fn param_count_folded_vs_plain() {
        let c = Conv::new(16, 32, 3, 1, 1, &mut Init::zeros()).unwrap();
        assert_eq!(c.param_count(), 16 * 32 * 9 + 64);
        let p = Conv::plain(16, 32, 1, &mut Init::zeros()).unwrap();
        assert_eq!(p.param_count(), 16 * 32 + 32);
    }
}
