use crate::blocks::DetectOutput;
use crate::error::{Error, Result};
use crate::tensor::Tensor4;

use super::{BBox, Detection};

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// Softmax-weighted mean bin index of `logits`.
fn expected_bin(logits: impl Iterator<Item = f32> + Clone) -> f32 {
    let m = logits.clone().fold(f32::NEG_INFINITY, f32::max);
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (k, v) in logits.enumerate() {
        let e = ((v - m) as f64).exp();
        num += k as f64 * e;
        den += e;
    }
    (num / den) as f32
}

/// Decodes every batch item of `raw`, keeping class scores `>= conf_thresh`.
pub fn decode(raw: &DetectOutput, conf_thresh: f32) -> Result<Vec<Vec<Detection>>> {
    decode_scales(&raw.scales, raw.reg_max, &raw.strides(), conf_thresh)
}

/// Decodes head maps with `4·reg_max` distance-bin channels (left, top, right,
/// bottom) followed by class logits.
///
/// Each cell contributes at most one detection per class, centred at
/// `(x + 0.5, y + 0.5)·stride`. Output order is scale, row, column, class.
pub fn decode_scales(
    scales: &[Tensor4],
    reg_max: usize,
    strides: &[usize],
    conf_thresh: f32,
) -> Result<Vec<Vec<Detection>>> {
    const OP: &str = "decode";
    if scales.len() != strides.len() {
        return Err(Error::config(
            OP,
            format!("{} scales but {} strides", scales.len(), strides.len()),
        ));
    }
    let first = scales
        .first()
        .ok_or_else(|| Error::config(OP, "no scales to decode"))?;
    let batch = first.n();
    let channels = first.c();
    if reg_max == 0 || channels <= 4 * reg_max {
        return Err(Error::config(
            OP,
            format!(
                "{channels} channels cannot hold 4·reg_max={} box bins plus classes",
                4 * reg_max
            ),
        ));
    }
    let nc = channels - 4 * reg_max;
    for s in scales {
        if s.c() != channels || s.n() != batch {
            return Err(Error::config(
                OP,
                format!("scale shape {} disagrees with {}", s.shape(), first.shape()),
            ));
        }
    }
    let mut out = vec![Vec::new(); batch];
    for (t, &stride) in scales.iter().zip(strides) {
        let plane = t.h() * t.w();
        for (n, dets) in out.iter_mut().enumerate() {
            let img = t.image(n);
            for y in 0..t.h() {
                for x in 0..t.w() {
                    let cell = y * t.w() + x;
                    let at = |c: usize| img[c * plane + cell];
                    let mut bbox = None;
                    for cls in 0..nc {
                        let score = sigmoid(at(4 * reg_max + cls));
                        if score < conf_thresh {
                            continue;
                        }
                        let b = *bbox.get_or_insert_with(|| {
                            let side = |s: usize| {
                                expected_bin((0..reg_max).map(move |k| at(s * reg_max + k)))
                            };
                            let (cx, cy) = (x as f32 + 0.5, y as f32 + 0.5);
                            let st = stride as f32;
                            BBox::new(
                                (cx - side(0)) * st,
                                (cy - side(1)) * st,
                                (cx + side(2)) * st,
                                (cy + side(3)) * st,
                            )
                        });
                        dets.push(Detection {
                            bbox: b,
                            class_id: cls,
                            score,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}
