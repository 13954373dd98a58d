//! Greedy detection matching and all-point interpolated average precision.

use serde::{Deserialize, Serialize};

use super::bbox::{iou, BBox};
use super::CategoryId;

/// A scored, labeled detector output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub score: f64,
    pub category: CategoryId,
}

/// A labeled ground-truth object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub category: CategoryId,
}

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Detection indices ordered by descending score; equal scores keep input
/// order.
pub fn score_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    order
}

/// Greedy matching. Detections are visited by descending score and each
/// claims the still-unmatched ground truth with the highest IoU, provided
/// that IoU reaches `iou_threshold`. Returns, per detection (input order),
/// the matched ground-truth index.
///
/// Callers are expected to pass a single category; labels are not checked.
pub fn match_detections(dets: &[Detection], gts: &[GroundTruth], iou_threshold: f64) -> Vec<Option<usize>> {
    let mut matches = vec![None; dets.len()];
    let mut taken = vec![false; gts.len()];
    for d in score_order(dets) {
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if taken[g] {
                continue;
            }
            let overlap = iou(&dets[d].bbox, &gt.bbox);
            if overlap >= iou_threshold && best.is_none_or(|(_, b)| overlap > b) {
                best = Some((g, overlap));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            matches[d] = Some(g);
        }
    }
    matches
}

/// Area under the precision envelope of the ranked detections.
///
/// Returns `None` when there is no ground truth: such images carry no
/// information about the category and are left out of averages.
pub fn average_precision(dets: &[Detection], gts: &[GroundTruth], iou_threshold: f64) -> Option<f64> {
    if gts.is_empty() {
        return None;
    }
    let matches = match_detections(dets, gts, iou_threshold);
    let order = score_order(dets);
    let n_gt = gts.len() as f64;

    let mut tp = 0usize;
    let mut recall = Vec::with_capacity(order.len());
    let mut precision = Vec::with_capacity(order.len());
    for (rank, &d) in order.iter().enumerate() {
        if matches[d].is_some() {
            tp += 1;
        }
        recall.push(tp as f64 / n_gt);
        precision.push(tp as f64 / (rank + 1) as f64);
    }

    // envelope: running max from the tail
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }

    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (r, p) in recall.iter().zip(&precision) {
        if *r > prev_recall {
            ap += (r - prev_recall) * p;
            prev_recall = *r;
        }
    }
    Some(ap.clamp(0.0, 1.0))
}

/// Per-image AP for one category, filtering both lists by label.
pub fn image_ap(dets: &[Detection], gts: &[GroundTruth], category: CategoryId, iou_threshold: f64) -> Option<f64> {
    let gts: Vec<GroundTruth> = gts.iter().filter(|g| g.category == category).cloned().collect();
    if gts.is_empty() {
        return None;
    }
    let dets: Vec<Detection> = dets.iter().filter(|d| d.category == category).cloned().collect();
    average_precision(&dets, &gts, iou_threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt(x: f64) -> GroundTruth {
        GroundTruth { bbox: BBox::new(x, 0.0, x + 10.0, 10.0), category: CategoryId(0) }
    }

    fn det(x: f64, score: f64) -> Detection {
        Detection { bbox: BBox::new(x, 0.0, x + 10.0, 10.0), score, category: CategoryId(0) }
    }

    #[test]
    fn perfect_detection_matches() {
        assert_eq!(match_detections(&[det(0.0, 0.9)], &[gt(0.0)], 0.5), vec![Some(0)]);
        assert_eq!(average_precision(&[det(0.0, 0.9)], &[gt(0.0)], 0.5), Some(1.0));
    }

    #[test]
    fn duplicate_goes_to_higher_score() {
        let dets = [det(0.0, 0.3), det(1.0, 0.8)];
        assert_eq!(match_detections(&dets, &[gt(0.0)], 0.5), vec![None, Some(0)]);
    }

    #[test]
    fn below_threshold_is_unmatched() {
        // width 10 boxes offset by 5.7 give IoU 43/157 ≈ 0.27; offset 4.3 gives ≈ 0.40
        let d = det(4.3, 0.9);
        let g = gt(0.0);
        let overlap = iou(&d.bbox, &g.bbox);
        assert!(overlap < 0.5 && overlap > 0.39);
        assert_eq!(match_detections(&[d], &[g], 0.5), vec![None]);
    }

    #[test]
    fn score_ties_follow_input_order() {
        let dets = [det(0.5, 0.7), det(0.0, 0.7)];
        assert_eq!(match_detections(&dets, &[gt(0.0)], 0.5), vec![Some(0), None]);
    }

    #[test]
    fn no_detections_zero_ap() {
        assert_eq!(average_precision(&[], &[gt(0.0)], 0.5), Some(0.0));
    }

    #[test]
    fn no_ground_truth_undefined() {
        assert_eq!(average_precision(&[det(0.0, 0.9)], &[], 0.5), None);
    }

    #[test]
    fn tp_fp_tp_ranking() {
        // precisions 1, 1/2, 2/3 at recalls 1/2, 1/2, 1 → 0.5·1 + 0.5·(2/3) = 5/6
        let gts = [gt(0.0), gt(100.0)];
        let dets = [det(0.0, 0.9), det(50.0, 0.8), det(100.0, 0.7)];
        let ap = average_precision(&dets, &gts, 0.5).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-12, "{ap}");
    }

    #[test]
    fn envelope_lifts_earlier_precision() {
        // FP first, then two TPs: precisions 0, 1/2, 2/3; envelope 2/3 throughout
        let gts = [gt(0.0), gt(100.0)];
        let dets = [det(50.0, 0.9), det(0.0, 0.8), det(100.0, 0.7)];
        let ap = average_precision(&dets, &gts, 0.5).unwrap();
        assert!((ap - 2.0 / 3.0).abs() < 1e-12, "{ap}");
    }

    #[test]
    fn image_ap_filters_categories() {
        let gts = [gt(0.0), GroundTruth { bbox: BBox::new(100.0, 0.0, 110.0, 10.0), category: CategoryId(1) }];
        let dets = [det(0.0, 0.9)];
        assert_eq!(image_ap(&dets, &gts, CategoryId(0), 0.5), Some(1.0));
        assert_eq!(image_ap(&dets, &gts, CategoryId(1), 0.5), Some(0.0));
        assert_eq!(image_ap(&dets, &gts, CategoryId(2), 0.5), None);
    }
}
