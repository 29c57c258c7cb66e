use super::{Conv, ConvUnits, Init};
use crate::error::{Error, Result};
use crate::tensor::{add, concat_channels, maxpool2d, split_channels, ConvExec, Shape4, Tensor4};

/// Two 3×3 conv blocks with an optional residual add.
#[derive(Debug, Clone, PartialEq)]
pub struct Bottleneck {
    pub cv1: Conv,
    pub cv2: Conv,
    pub shortcut: bool,
}

impl Bottleneck {
    pub fn new(c: usize, shortcut: bool, init: &mut Init) -> Result<Self> {
        Ok(Self {
            cv1: Conv::new(c, c, 3, 1, 1, init)?,
            cv2: Conv::new(c, c, 3, 1, 1, init)?,
            shortcut,
        })
    }

    pub fn forward(&self, x: &Tensor4, exec: &dyn ConvExec) -> Result<Tensor4> {
        let y = self.cv2.forward(&self.cv1.forward(x, exec)?, exec)?;
        if self.shortcut {
            add(x, &y)
        } else {
            Ok(y)
        }
    }
}

/// Cross-stage-partial block with two convolutions and `n` bottlenecks.
///
/// `cv1` widens to `2·hidden`, the result is split in halves, each bottleneck
/// consumes the newest chunk, and `cv2` fuses all `2 + n` chunks to `out_c`.
/// C2fi is this block with `shortcut == false`.
#[derive(Debug, Clone, PartialEq)]
pub struct C2f {
    pub cv1: Conv,
    pub m: Vec<Bottleneck>,
    pub cv2: Conv,
    hidden: usize,
}

impl C2f {
    pub fn new(
        in_c: usize,
        out_c: usize,
        n: usize,
        shortcut: bool,
        init: &mut Init,
    ) -> Result<Self> {
        if !out_c.is_multiple_of(2) {
            return Err(Error::config(
                "c2f_block",
                format!("out_c must be even, got {out_c}"),
            ));
        }
        Self::with_hidden(in_c, out_c, out_c / 2, n, shortcut, init)
    }

    pub fn with_hidden(
        in_c: usize,
        out_c: usize,
        hidden: usize,
        n: usize,
        shortcut: bool,
        init: &mut Init,
    ) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::config(
                "c2f_block",
                "hidden width must be at least 1",
            ));
        }
        let cv1 = Conv::new(in_c, 2 * hidden, 1, 1, 1, init)?;
        let m = (0..n)
            .map(|_| Bottleneck::new(hidden, shortcut, init))
            .collect::<Result<Vec<_>>>()?;
        let cv2 = Conv::new((2 + n) * hidden, out_c, 1, 1, 1, init)?;
        Ok(Self {
            cv1,
            m,
            cv2,
            hidden,
        })
    }

    pub fn shortcut(&self) -> bool {
        self.m.first().is_some_and(|b| b.shortcut)
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Residual additions executed per forward pass (zero for C2fi).
    pub fn residual_adds(&self) -> usize {
        self.m.iter().filter(|b| b.shortcut).count()
    }

    pub fn forward(&self, x: &Tensor4, exec: &dyn ConvExec) -> Result<Tensor4> {
        let y = self.cv1.forward(x, exec)?;
        let mut chunks = split_channels(&y, &[self.hidden, self.hidden])?;
        for b in &self.m {
            let next = b.forward(chunks.last().expect("split yields two chunks"), exec)?;
            chunks.push(next);
        }
        let refs: Vec<&Tensor4> = chunks.iter().collect();
        self.cv2.forward(&concat_channels(&refs)?, exec)
    }

    pub fn trace(&self, input: Shape4) -> Result<(Shape4, u64)> {
        let (mid, mut macs) = self.cv1.trace(input)?;
        let half = mid.with_channels(self.hidden);
        for b in &self.m {
            macs += b.cv1.trace(half)?.1 + b.cv2.trace(half)?.1;
        }
        let (out, m2) = self
            .cv2
            .trace(mid.with_channels((2 + self.m.len()) * self.hidden))?;
        Ok((out, macs + m2))
    }
}

impl ConvUnits for C2f {
    fn convs(&self) -> Vec<(String, &Conv)> {
        let mut v = vec![("cv1".to_string(), &self.cv1)];
        for (i, b) in self.m.iter().enumerate() {
            v.push((format!("m.{i}.cv1"), &b.cv1));
            v.push((format!("m.{i}.cv2"), &b.cv2));
        }
        v.push(("cv2".to_string(), &self.cv2));
        v
    }
    fn convs_mut(&mut self) -> Vec<(String, &mut Conv)> {
        let mut v = vec![("cv1".to_string(), &mut self.cv1)];
        for (i, b) in self.m.iter_mut().enumerate() {
            v.push((format!("m.{i}.cv1"), &mut b.cv1));
            v.push((format!("m.{i}.cv2"), &mut b.cv2));
        }
        v.push(("cv2".to_string(), &mut self.cv2));
        v
    }
}

/// Spatial pyramid pooling (fast): 1×1 squeeze, three cascaded same-padding
/// max-pools, concat of all four, 1×1 to `out_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sppf {
    pub cv1: Conv,
    pub cv2: Conv,
    pub pool_k: usize,
}

impl Sppf {
    pub fn new(in_c: usize, out_c: usize, pool_k: usize, init: &mut Init) -> Result<Self> {
        if in_c < 2 {
            return Err(Error::config(
                "sppf_block",
                "needs at least 2 input channels",
            ));
        }
        if pool_k.is_multiple_of(2) {
            return Err(Error::config(
                "sppf_block",
                format!("pool kernel must be odd, got {pool_k}"),
            ));
        }
        let hidden = in_c / 2;
        Ok(Self {
            cv1: Conv::new(in_c, hidden, 1, 1, 1, init)?,
            cv2: Conv::new(4 * hidden, out_c, 1, 1, 1, init)?,
            pool_k,
        })
    }

    /// The hidden map and its three successive poolings.
    pub fn pyramid(&self, x: &Tensor4, exec: &dyn ConvExec) -> Result<[Tensor4; 4]> {
        let h = self.cv1.forward(x, exec)?;
        let pad = self.pool_k / 2;
        let p1 = maxpool2d(&h, self.pool_k, 1, pad)?;
        let p2 = maxpool2d(&p1, self.pool_k, 1, pad)?;
        let p3 = maxpool2d(&p2, self.pool_k, 1, pad)?;
        Ok([h, p1, p2, p3])
    }

    pub fn forward(&self, x: &Tensor4, exec: &dyn ConvExec) -> Result<Tensor4> {
        let [h, p1, p2, p3] = self.pyramid(x, exec)?;
        self.cv2
            .forward(&concat_channels(&[&h, &p1, &p2, &p3])?, exec)
    }

    pub fn trace(&self, input: Shape4) -> Result<(Shape4, u64)> {
        let (h, m1) = self.cv1.trace(input)?;
        let (out, m2) = self.cv2.trace(h.with_channels(4 * h.c))?;
        Ok((out, m1 + m2))
    }
}

impl ConvUnits for Sppf {
    fn convs(&self) -> Vec<(String, &Conv)> {
        vec![("cv1".into(), &self.cv1), ("cv2".into(), &self.cv2)]
    }
    fn convs_mut(&mut self) -> Vec<(String, &mut Conv)> {
        vec![("cv1".into(), &mut self.cv1), ("cv2".into(), &mut self.cv2)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::FastExec;

    const EXEC: FastExec = FastExec { parallel: false };

    #[test]
    fn n0_shape() {
        let b = C2f::new(8, 12, 0, true, &mut Init::seeded(1)).unwrap();
        let x = Tensor4::random(Shape4::new(1, 8, 5, 5), 1, -1.0, 1.0).unwrap();
        assert_eq!(
            b.forward(&x, &EXEC).unwrap().shape(),
            Shape4::new(1, 12, 5, 5)
        );
        assert_eq!(b.convs().len(), 2);
    }

    #[test]
    fn shortcut_changes_output() {
        let x = Tensor4::random(Shape4::new(1, 8, 6, 6), 2, -1.0, 1.0).unwrap();
        let with = C2f::new(8, 8, 2, true, &mut Init::seeded(5)).unwrap();
        let without = C2f::new(8, 8, 2, false, &mut Init::seeded(5)).unwrap();
        assert_eq!(with.convs().len(), without.convs().len());
        assert_ne!(
            with.forward(&x, &EXEC).unwrap(),
            without.forward(&x, &EXEC).unwrap()
        );
        assert_eq!(with.residual_adds(), 2);
        assert_eq!(without.residual_adds(), 0);
    }

    #[test]
    fn sppf_constant_input() {
        let b = Sppf::new(4, 4, 5, &mut Init::seeded(3)).unwrap();
        let x = Tensor4::full(Shape4::new(1, 4, 6, 6), 0.7).unwrap();
        let pyr = b.pyramid(&x, &EXEC).unwrap();
        for p in &pyr[1..] {
            assert_eq!(p, &pyr[0]);
        }
        let h = &pyr[0];
        let v0 = h.at(0, 0, 0, 0);
        assert!(h.data()[..36].iter().all(|&v| v == v0));
        assert_eq!(b.forward(&x, &EXEC).unwrap().shape(), x.shape());
    }
}
