use std::collections::HashMap;

use super::{iou, Detection};

/// IoU above which a same-class box is suppressed.
pub const NMS_IOU: f64 = 0.5;

/// Greedy per-class non-maximum suppression.
///
/// Boxes are visited by descending score, then ascending class id, then input
/// order; a box is dropped when its IoU with an already kept box of the same
/// class exceeds `iou_thresh`. Survivors are returned in visiting order.
pub fn nms(dets: &[Detection], iou_thresh: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .total_cmp(&dets[a].score)
            .then(dets[a].class_id.cmp(&dets[b].class_id))
            .then(a.cmp(&b))
    });
    let mut kept_by_class: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut out = Vec::new();
    for i in order {
        let d = &dets[i];
        let kept = kept_by_class.entry(d.class_id).or_default();
        if kept
            .iter()
            .all(|&j| iou(&dets[j].bbox, &d.bbox) <= iou_thresh)
        {
            kept.push(i);
            out.push(*d);
        }
    }
    out
}
