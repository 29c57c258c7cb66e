//! Turning raw head maps into boxes: anchor-free decode, IoU, per-class greedy
//! NMS, a COCO-style mAP evaluator and the JSON-lines box interchange format.

mod decode;
mod jsonl;
mod map;
mod nms;

use serde::{Deserialize, Serialize};

pub use decode::{decode, decode_scales};
pub use jsonl::{read_records, records_to_jsonl, split_records, BoxRecord};
pub use map::{evaluate_map, ClassAp, EvalResult, IOU_THRESHOLDS};
pub use nms::{nms, NMS_IOU};

/// Default confidence threshold for demos and the pipeline.
pub const DEFAULT_CONF: f32 = 0.25;
/// Confidence threshold used when collecting predictions for mAP.
pub const EVAL_CONF: f32 = 0.001;

/// Axis-aligned box `(x1, y1, x2, y2)` in input-image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f32; 4]", into = "[f32; 4]")]
pub struct BBox {
    pub x1: f32,
    pub y1: f32,
    pub x2: f32,
    pub y2: f32,
}

impl BBox {
    pub const fn new(x1: f32, y1: f32, x2: f32, y2: f32) -> Self {
        Self { x1, y1, x2, y2 }
    }

    pub fn is_valid(&self) -> bool {
        self.x2 > self.x1 && self.y2 > self.y1
    }

    pub fn area(&self) -> f64 {
        let w = (self.x2 as f64 - self.x1 as f64).max(0.0);
        let h = (self.y2 as f64 - self.y1 as f64).max(0.0);
        w * h
    }

    pub fn scaled(&self, sx: f32, sy: f32) -> Self {
        Self::new(self.x1 * sx, self.y1 * sy, self.x2 * sx, self.y2 * sy)
    }
}

impl From<[f32; 4]> for BBox {
    fn from(v: [f32; 4]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f32; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

/// Intersection over union; 0 when either box is degenerate.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let (aa, ba) = (a.area(), b.area());
    if aa <= 0.0 || ba <= 0.0 {
        return 0.0;
    }
    let iw = (a.x2.min(b.x2) as f64 - a.x1.max(b.x1) as f64).max(0.0);
    let ih = (a.y2.min(b.y2) as f64 - a.y1.max(b.y1) as f64).max(0.0);
    let inter = iw * ih;
    (inter / (aa + ba - inter)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub class_id: usize,
    pub score: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthBox {
    pub bbox: BBox,
    pub class_id: usize,
    pub image_id: String,
}

/// A detection attributed to an image, as fed to [`evaluate_map`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub image_id: String,
    #[serde(flatten)]
    pub det: Detection,
}
