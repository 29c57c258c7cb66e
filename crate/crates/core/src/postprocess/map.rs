use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{iou, GroundTruthBox, Prediction};

/// COCO IoU thresholds 0.50, 0.55, …, 0.95.
pub const IOU_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub class_id: usize,
    pub num_gt: usize,
    pub num_pred: usize,
    /// AP at each of [`IOU_THRESHOLDS`].
    pub ap: Vec<f64>,
    pub ap50: f64,
    pub ap50_95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub map50: f64,
    pub map50_95: f64,
    pub per_class: Vec<ClassAp>,
}

/// COCO-style box mAP with 101-point interpolation.
///
/// Predictions of a class are ranked by descending score (input order breaks
/// ties); each one matches the unmatched ground-truth box of the same image and
/// class with the highest IoU, provided that IoU is at least the threshold.
/// Classes with neither ground truth nor predictions are left out of the mean;
/// classes with predictions but no ground truth score 0. With no class to
/// evaluate at all, both means are 0.
pub fn evaluate_map(preds: &[Prediction], gts: &[GroundTruthBox]) -> EvalResult {
    let classes: BTreeSet<usize> = preds
        .iter()
        .map(|p| p.det.class_id)
        .chain(gts.iter().map(|g| g.class_id))
        .collect();
    let per_class: Vec<ClassAp> = classes
        .into_iter()
        .map(|c| class_ap(c, preds, gts))
        .collect();
    let mean = |f: fn(&ClassAp) -> f64| {
        if per_class.is_empty() {
            0.0
        } else {
            per_class.iter().map(f).sum::<f64>() / per_class.len() as f64
        }
    };
    EvalResult {
        map50: mean(|c| c.ap50),
        map50_95: mean(|c| c.ap50_95),
        per_class,
    }
}

fn class_ap(class_id: usize, preds: &[Prediction], gts: &[GroundTruthBox]) -> ClassAp {
    let mut gt_by_image: HashMap<&str, Vec<&GroundTruthBox>> = HashMap::new();
    for g in gts.iter().filter(|g| g.class_id == class_id) {
        gt_by_image.entry(&g.image_id).or_default().push(g);
    }
    let num_gt: usize = gt_by_image.values().map(Vec::len).sum();
    let mut ranked: Vec<&Prediction> = preds
        .iter()
        .filter(|p| p.det.class_id == class_id)
        .collect();
    ranked.sort_by(|a, b| b.det.score.total_cmp(&a.det.score));

    let ap: Vec<f64> = IOU_THRESHOLDS
        .iter()
        .map(|&t| {
            if num_gt == 0 {
                return 0.0;
            }
            let mut used: BTreeMap<&str, Vec<bool>> = gt_by_image
                .iter()
                .map(|(k, v)| (*k, vec![false; v.len()]))
                .collect();
            let hits: Vec<bool> = ranked
                .iter()
                .map(|p| {
                    let (Some(cands), Some(flags)) = (
                        gt_by_image.get(p.image_id.as_str()),
                        used.get_mut(p.image_id.as_str()),
                    ) else {
                        return false;
                    };
                    let mut best: Option<(usize, f64)> = None;
                    for (j, g) in cands.iter().enumerate() {
                        if flags[j] {
                            continue;
                        }
                        let v = iou(&p.det.bbox, &g.bbox);
                        if v >= t && best.is_none_or(|(_, b)| v > b) {
                            best = Some((j, v));
                        }
                    }
                    best.map(|(j, _)| flags[j] = true).is_some()
                })
                .collect();
            interpolated_ap(&hits, num_gt)
        })
        .collect();
    ClassAp {
        class_id,
        num_gt,
        num_pred: ranked.len(),
        ap50: ap[0],
        ap50_95: ap.iter().sum::<f64>() / ap.len() as f64,
        ap,
    }
}

/// 101-point interpolated AP of a ranked hit list.
fn interpolated_ap(hits: &[bool], num_gt: usize) -> f64 {
    let mut recall = Vec::with_capacity(hits.len());
    let mut precision = Vec::with_capacity(hits.len());
    let mut tp = 0usize;
    for (i, &h) in hits.iter().enumerate() {
        tp += h as usize;
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (i + 1) as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    (0..=100)
        .map(|r| {
            let r = r as f64 / 100.0;
            let k = recall.partition_point(|&x| x < r);
            precision.get(k).copied().unwrap_or(0.0)
        })
        .sum::<f64>()
        / 101.0
}
