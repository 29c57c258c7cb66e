use super::{Conv, ConvUnits, Init};
use crate::error::{Error, Result};
use crate::tensor::{concat_channels, ConvExec, Shape4, Tensor4};

/// Feature strides of the three detection scales (small, medium, large objects).
pub const DETECT_STRIDES: [usize; 3] = [8, 16, 32];

/// Raw per-scale head maps, each with `4·reg_max + num_classes` channels:
/// box-distribution logits first, class logits after.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectOutput {
    pub scales: Vec<Tensor4>,
    pub reg_max: usize,
    pub num_classes: usize,
}

impl DetectOutput {
    pub fn channels(&self) -> usize {
        4 * self.reg_max + self.num_classes
    }

    pub fn strides(&self) -> [usize; 3] {
        DETECT_STRIDES
    }
}

/// One branch at one scale: two 3×3 conv blocks and a plain 1×1 output conv.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadBranch {
    pub convs: [Conv; 3],
}

impl HeadBranch {
    fn new(in_c: usize, hidden: usize, out_c: usize, init: &mut Init) -> Result<Self> {
        Ok(Self {
            convs: [
                Conv::new(in_c, hidden, 3, 1, 1, init)?,
                Conv::new(hidden, hidden, 3, 1, 1, init)?,
                Conv::plain(hidden, out_c, 1, init)?,
            ],
        })
    }

    fn forward(&self, x: &Tensor4, exec: &dyn ConvExec) -> Result<Tensor4> {
        let y = self.convs[0].forward(x, exec)?;
        let y = self.convs[1].forward(&y, exec)?;
        self.convs[2].forward(&y, exec)
    }

    fn trace(&self, input: Shape4) -> Result<(Shape4, u64)> {
        let mut s = input;
        let mut macs = 0;
        for c in &self.convs {
            let (o, m) = c.trace(s)?;
            s = o;
            macs += m;
        }
        Ok((s, macs))
    }
}

/// Anchor-free decoupled head: per scale, a box branch (`4·reg_max` channels)
/// and an independent class branch (`num_classes` channels).
#[derive(Debug, Clone, PartialEq)]
pub struct DetectHead {
    pub boxes: Vec<HeadBranch>,
    pub classes: Vec<HeadBranch>,
    pub reg_max: usize,
    pub num_classes: usize,
}

impl DetectHead {
    pub fn new(
        in_channels: &[usize],
        num_classes: usize,
        reg_max: usize,
        init: &mut Init,
    ) -> Result<Self> {
        const OP: &str = "detect_head";
        if in_channels.len() != DETECT_STRIDES.len() {
            return Err(Error::config(
                OP,
                format!("expected exactly 3 feature maps, got {}", in_channels.len()),
            ));
        }
        if num_classes == 0 || reg_max == 0 {
            return Err(Error::config(
                OP,
                "num_classes and reg_max must be at least 1",
            ));
        }
        let box_hidden = (in_channels[0] / 4).max(16).max(4 * reg_max);
        let cls_hidden = in_channels[0].max(num_classes.min(100));
        let mut boxes = Vec::with_capacity(3);
        let mut classes = Vec::with_capacity(3);
        for (&c, &stride) in in_channels.iter().zip(&DETECT_STRIDES) {
            let mut b = HeadBranch::new(c, box_hidden, 4 * reg_max, init)?;
            let mut k = HeadBranch::new(c, cls_hidden, num_classes, init)?;
            if init.is_random() {
                // Priors: box distances start spread out, class scores start near zero
                // (about 5 objects per 640×640 image).
                b.convs[2].params.bias.fill(1.0);
                let prior =
                    (5.0 / num_classes as f64 / (640.0 / stride as f64).powi(2)).ln() as f32;
                k.convs[2].params.bias.fill(prior);
            }
            boxes.push(b);
            classes.push(k);
        }
        Ok(Self {
            boxes,
            classes,
            reg_max,
            num_classes,
        })
    }

    pub fn channels(&self) -> usize {
        4 * self.reg_max + self.num_classes
    }

    pub fn forward(&self, features: &[&Tensor4], exec: &dyn ConvExec) -> Result<DetectOutput> {
        if features.len() != DETECT_STRIDES.len() {
            return Err(Error::config(
                "detect_head",
                format!("expected exactly 3 feature maps, got {}", features.len()),
            ));
        }
        let scales = features
            .iter()
            .zip(self.boxes.iter().zip(&self.classes))
            .map(|(x, (b, k))| {
                let bx = b.forward(x, exec)?;
                let cl = k.forward(x, exec)?;
                concat_channels(&[&bx, &cl])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DetectOutput {
            scales,
            reg_max: self.reg_max,
            num_classes: self.num_classes,
        })
    }

    pub fn trace(&self, inputs: &[Shape4]) -> Result<(Vec<Shape4>, u64)> {
        if inputs.len() != DETECT_STRIDES.len() {
            return Err(Error::config(
                "detect_head",
                format!("expected exactly 3 feature maps, got {}", inputs.len()),
            ));
        }
        let mut shapes = Vec::with_capacity(3);
        let mut macs = 0;
        for (s, (b, k)) in inputs.iter().zip(self.boxes.iter().zip(&self.classes)) {
            let (bs, m1) = b.trace(*s)?;
            let (_, m2) = k.trace(*s)?;
            shapes.push(bs.with_channels(self.channels()));
            macs += m1 + m2;
        }
        Ok((shapes, macs))
    }
}

impl ConvUnits for DetectHead {
    fn convs(&self) -> Vec<(String, &Conv)> {
        let mut v = Vec::new();
        for (tag, branches) in [("box", &self.boxes), ("cls", &self.classes)] {
            for (i, b) in branches.iter().enumerate() {
                for (j, c) in b.convs.iter().enumerate() {
                    v.push((format!("{tag}.{i}.{j}"), c));
                }
            }
        }
        v
    }

    fn convs_mut(&mut self) -> Vec<(String, &mut Conv)> {
        let mut v = Vec::new();
        for (tag, branches) in [("box", &mut self.boxes), ("cls", &mut self.classes)] {
            for (i, b) in branches.iter_mut().enumerate() {
                for (j, c) in b.convs.iter_mut().enumerate() {
                    v.push((format!("{tag}.{i}.{j}"), c));
                }
            }
        }
        v
    }
}
