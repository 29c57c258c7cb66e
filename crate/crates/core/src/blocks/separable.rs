use super::{prefixed, prefixed_mut, Conv, ConvUnits, Init};
use crate::error::{Error, Result};
use crate::tensor::{concat_channels, ConvExec, Shape4, Tensor4};

/// Depthwise `k×k` (stride `s`) then pointwise 1×1, each with folded norm and SiLU.
#[derive(Debug, Clone, PartialEq)]
pub struct DwSeparable {
    pub dw: Conv,
    pub pw: Conv,
}

impl DwSeparable {
    pub fn new(in_c: usize, out_c: usize, k: usize, s: usize, init: &mut Init) -> Result<Self> {
        Ok(Self {
            dw: Conv::new(in_c, in_c, k, s, in_c, init)?,
            pw: Conv::new(in_c, out_c, 1, 1, 1, init)?,
        })
    }

    pub fn forward(&self, x: &Tensor4, exec: &dyn ConvExec) -> Result<Tensor4> {
        let y = self.dw.forward(x, exec)?;
        self.pw.forward(&y, exec)
    }

    pub fn trace(&self, input: Shape4) -> Result<(Shape4, u64)> {
        let (mid, m1) = self.dw.trace(input)?;
        let (out, m2) = self.pw.trace(mid)?;
        Ok((out, m1 + m2))
    }
}

impl ConvUnits for DwSeparable {
    fn convs(&self) -> Vec<(String, &Conv)> {
        vec![("dw".into(), &self.dw), ("pw".into(), &self.pw)]
    }
    fn convs_mut(&mut self) -> Vec<(String, &mut Conv)> {
        vec![("dw".into(), &mut self.dw), ("pw".into(), &mut self.pw)]
    }
}

/// Ghost convolution: a primary conv makes half the channels and a cheap
/// depthwise conv over the primary output makes the other half.
#[derive(Debug, Clone, PartialEq)]
pub struct GhostConv {
    pub primary: Conv,
    pub cheap: Conv,
}

impl GhostConv {
    pub fn new(in_c: usize, out_c: usize, k: usize, s: usize, init: &mut Init) -> Result<Self> {
        if !out_c.is_multiple_of(2) || out_c == 0 {
            return Err(Error::config(
                "ghost_conv",
                format!("out_c must be even and positive, got {out_c}"),
            ));
        }
        let half = out_c / 2;
        Ok(Self {
            primary: Conv::new(in_c, half, k, s, 1, init)?,
            cheap: Conv::new(half, half, k, 1, half, init)?,
        })
    }

    pub fn forward_primary(&self, x: &Tensor4, exec: &dyn ConvExec) -> Result<Tensor4> {
        self.primary.forward(x, exec)
    }

    pub fn forward(&self, x: &Tensor4, exec: &dyn ConvExec) -> Result<Tensor4> {
        let p = self.primary.forward(x, exec)?;
        let c = self.cheap.forward(&p, exec)?;
        concat_channels(&[&p, &c])
    }

    pub fn trace(&self, input: Shape4) -> Result<(Shape4, u64)> {
        let (p, m1) = self.primary.trace(input)?;
        let (c, m2) = self.cheap.trace(p)?;
        Ok((p.with_channels(p.c + c.c), m1 + m2))
    }
}

impl ConvUnits for GhostConv {
    fn convs(&self) -> Vec<(String, &Conv)> {
        vec![
            ("primary".into(), &self.primary),
            ("cheap".into(), &self.cheap),
        ]
    }
    fn convs_mut(&mut self) -> Vec<(String, &mut Conv)> {
        vec![
            ("primary".into(), &mut self.primary),
            ("cheap".into(), &mut self.cheap),
        ]
    }
}

/// Phantom convolution: Ghost layout whose primary branch is a grouped
/// (default 4 groups) 5×5 conv and whose cheap branch is a depthwise-separable
/// block over the primary output.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomConv {
    pub primary: Conv,
    pub cheap: DwSeparable,
}

impl PhantomConv {
    pub const GROUPS: usize = 4;
    pub const KERNEL: usize = 5;

    /// Default geometry: 4 groups, 5×5 primary, 5×5 cheap depthwise.
    pub fn new(in_c: usize, out_c: usize, s: usize, init: &mut Init) -> Result<Self> {
        Self::with_options(
            in_c,
            out_c,
            s,
            Self::GROUPS,
            Self::KERNEL,
            Self::KERNEL,
            init,
        )
    }

    pub fn with_options(
        in_c: usize,
        out_c: usize,
        s: usize,
        groups: usize,
        k: usize,
        cheap_k: usize,
        init: &mut Init,
    ) -> Result<Self> {
        const OP: &str = "phantom_conv";
        if !out_c.is_multiple_of(2) || out_c == 0 {
            return Err(Error::config(
                OP,
                format!("out_c must be even and positive, got {out_c}; use an even output width"),
            ));
        }
        let half = out_c / 2;
        if groups == 0 || !in_c.is_multiple_of(groups) {
            return Err(Error::config(
                OP,
                format!(
                    "in_c={in_c} is not divisible by the primary group count {groups}; \
                     feed a multiple of {groups} channels or lower `groups`"
                ),
            ));
        }
        if !half.is_multiple_of(groups) {
            return Err(Error::config(
                OP,
                format!(
                    "out_c/2={half} is not divisible by the primary group count {groups}; \
                     choose out_c as a multiple of {}",
                    2 * groups
                ),
            ));
        }
        Ok(Self {
            primary: Conv::new(in_c, half, k, s, groups, init)?,
            cheap: DwSeparable::new(half, half, cheap_k, 1, init)?,
        })
    }

    pub fn forward_primary(&self, x: &Tensor4, exec: &dyn ConvExec) -> Result<Tensor4> {
        self.primary.forward(x, exec)
    }

    pub fn forward(&self, x: &Tensor4, exec: &dyn ConvExec) -> Result<Tensor4> {
        let p = self.primary.forward(x, exec)?;
        let c = self.cheap.forward(&p, exec)?;
        concat_channels(&[&p, &c])
    }

    pub fn trace(&self, input: Shape4) -> Result<(Shape4, u64)> {
        let (p, m1) = self.primary.trace(input)?;
        let (c, m2) = self.cheap.trace(p)?;
        Ok((p.with_channels(p.c + c.c), m1 + m2))
    }
}

impl ConvUnits for PhantomConv {
    fn convs(&self) -> Vec<(String, &Conv)> {
        let mut v = vec![("primary".to_string(), &self.primary)];
        v.extend(prefixed("cheap", self.cheap.convs()));
        v
    }
    fn convs_mut(&mut self) -> Vec<(String, &mut Conv)> {
        let mut v = vec![("primary".to_string(), &mut self.primary)];
        v.extend(prefixed_mut("cheap", self.cheap.convs_mut()));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::FastExec;

    const EXEC: FastExec = FastExec { parallel: false };

    #[test]
    fn dw_separable_shape_and_params() {
        let b = DwSeparable::new(16, 32, 3, 1, &mut Init::seeded(1)).unwrap();
        let x = Tensor4::random(Shape4::new(1, 16, 8, 8), 1, -1.0, 1.0).unwrap();
        assert_eq!(
            b.forward(&x, &EXEC).unwrap().shape(),
            Shape4::new(1, 32, 8, 8)
        );
        assert_eq!(b.param_count(), 16 * 9 + 16 * 32 + 2 * (16 + 32));
    }

    #[test]
    fn ghost_first_half_is_primary() {
        let g = GhostConv::new(6, 8, 3, 1, &mut Init::seeded(2)).unwrap();
        let x = Tensor4::random(Shape4::new(1, 6, 7, 7), 3, -1.0, 1.0).unwrap();
        let y = g.forward(&x, &EXEC).unwrap();
        assert_eq!(y.shape(), Shape4::new(1, 8, 7, 7));
        let p = g.forward_primary(&x, &EXEC).unwrap();
        assert_eq!(&y.data()[..p.data().len()], p.data());
    }

    #[test]
    fn ghost_rejects_odd_width() {
        assert!(GhostConv::new(4, 7, 3, 1, &mut Init::zeros()).is_err());
    }

    #[test]
    fn phantom_shape() {
        let b = PhantomConv::new(16, 32, 1, &mut Init::seeded(3)).unwrap();
        let x = Tensor4::random(Shape4::new(1, 16, 8, 8), 4, -1.0, 1.0).unwrap();
        assert_eq!(
            b.forward(&x, &EXEC).unwrap().shape(),
            Shape4::new(1, 32, 8, 8)
        );
        let b = PhantomConv::new(16, 32, 2, &mut Init::seeded(3)).unwrap();
        assert_eq!(
            b.forward(&x, &EXEC).unwrap().shape(),
            Shape4::new(1, 32, 4, 4)
        );
    }

    #[test]
    fn phantom_divisibility_errors_have_hints() {
        let err = PhantomConv::new(6, 32, 1, &mut Init::zeros())
            .unwrap_err()
            .to_string();
        assert!(err.contains("multiple of 4"), "{err}");
        let err = PhantomConv::new(16, 12, 1, &mut Init::zeros())
            .unwrap_err()
            .to_string();
        assert!(err.contains("multiple of 8"), "{err}");
        assert!(PhantomConv::new(16, 9, 1, &mut Init::zeros()).is_err());
    }

    #[test]
    fn phantom_param_breakdown() {
        let b = PhantomConv::new(64, 64, 1, &mut Init::zeros()).unwrap();
        // primary 32×16×25 + 2·32; cheap dw 32×25 + 2·32; cheap pw 32×32 + 2·32
        assert_eq!(b.param_count(), 12_800 + 64 + 800 + 64 + 1024 + 64);
        let names: Vec<_> = b.convs().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["primary", "cheap.dw", "cheap.pw"]);
    }
}
