//! Reference implementations and trace builders shared by the integration
//! tests. Written from the definitions, without calling into the code they
//! check.

#![allow(dead_code)]

use std::collections::BTreeMap;

use dsa_core::lattice::GridSpec;
use dsa_core::trace::FrameRecord;
use dsa_core::trace::{ObjectTrack, Scenario, Split, TrackPoint, VideoSpec};
use dsa_core::{ApproxConfig, BBox, CategoryId, ConfigGrid, Detection, GroundTruth};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const HEIGHTS: [u32; 11] = [80, 120, 160, 200, 240, 280, 320, 360, 400, 440, 480];
pub const PROPOSALS: [u32; 5] = [10, 50, 100, 200, 300];

pub fn all_configs() -> Vec<ApproxConfig> {
    HEIGHTS.iter().flat_map(|&h| PROPOSALS.iter().map(move |&p| ApproxConfig::new(h, p))).collect()
}

pub fn reference_iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let ih = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = iw * ih;
    let area = |r: &BBox| (r.x_max - r.x_min) * (r.y_max - r.y_min);
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Ranked true/false-positive flags: detections by descending score (input
/// order on ties), each taking the free ground truth it overlaps most
/// (lowest index on ties) when that overlap is at least `thr`.
pub fn reference_hits(dets: &[Detection], gts: &[GroundTruth], thr: f64) -> Vec<bool> {
    let mut idx: Vec<usize> = (0..dets.len()).collect();
    // insertion sort keeps equal scores in input order
    for i in 1..idx.len() {
        let mut j = i;
        while j > 0 && dets[idx[j]].score > dets[idx[j - 1]].score {
            idx.swap(j, j - 1);
            j -= 1;
        }
    }
    let mut free = vec![true; gts.len()];
    idx.iter()
        .map(|&d| {
            let mut pick: Option<(usize, f64)> = None;
            for g in 0..gts.len() {
                let o = reference_iou(&dets[d].bbox, &gts[g].bbox);
                if free[g] && o >= thr && pick.is_none_or(|(_, b)| o > b) {
                    pick = Some((g, o));
                }
            }
            match pick {
                Some((g, _)) => {
                    free[g] = false;
                    true
                }
                None => false,
            }
        })
        .collect()
}

/// Area under the interpolated precision-recall curve, integrated recall
/// step by recall step: at recall k/n the interpolated precision is the best
/// precision achieved at any rank whose recall is at least k/n.
pub fn reference_ap(dets: &[Detection], gts: &[GroundTruth], thr: f64) -> Option<f64> {
    if gts.is_empty() {
        return None;
    }
    let hits = reference_hits(dets, gts, thr);
    let mut points = Vec::new();
    let mut tp = 0usize;
    for (rank, hit) in hits.iter().enumerate() {
        tp += usize::from(*hit);
        points.push((tp, tp as f64 / (rank + 1) as f64));
    }
    let n = gts.len();
    let total: f64 = (1..=n).map(|k| points.iter().filter(|(t, _)| *t >= k).map(|(_, p)| *p).fold(0.0, f64::max)).sum();
    Some(total / n as f64)
}

pub fn reference_category_ap(dets: &[Detection], gts: &[GroundTruth], cat: CategoryId, thr: f64) -> Option<f64> {
    let g: Vec<GroundTruth> = gts.iter().filter(|x| x.category == cat).cloned().collect();
    let d: Vec<Detection> = dets.iter().filter(|x| x.category == cat).cloned().collect();
    reference_ap(&d, &g, thr)
}

/// Brute-force safe set: configs whose AP is at least the (480, 300) AP for
/// every category in `cats`. With no category in scope everything is safe.
pub fn brute_safe(frame: &FrameRecord, cats: &[CategoryId], thr: f64) -> Vec<ApproxConfig> {
    let base = ApproxConfig::new(480, 300);
    all_configs()
        .into_iter()
        .filter(|&c| {
            cats.iter().all(|&cat| {
                let ap = reference_category_ap(&frame.outputs[&c], &frame.gts, cat, thr).unwrap();
                let b = reference_category_ap(&frame.outputs[&base], &frame.gts, cat, thr).unwrap();
                ap >= b
            })
        })
        .collect()
}

/// Highest fps; ties to the larger height, then more proposals.
pub fn brute_fastest(candidates: &[ApproxConfig], fps: impl Fn(ApproxConfig) -> f64) -> ApproxConfig {
    *candidates
        .iter()
        .max_by(|a, b| {
            fps(**a)
                .total_cmp(&fps(**b))
                .then(a.image_height.cmp(&b.image_height))
                .then(a.proposal_count.cmp(&b.proposal_count))
        })
        .unwrap()
}

pub fn det(bbox: BBox, score: f64, cat: u32) -> Detection {
    Detection { bbox, score, category: CategoryId(cat) }
}

pub fn gt(bbox: BBox, cat: u32) -> GroundTruth {
    GroundTruth { bbox, category: CategoryId(cat) }
}

/// Frame whose outputs per config are drawn at random around the ground
/// truth: hits, loose boxes, duplicates and clutter with arbitrary scores.
/// No structure across configs is assumed.
pub fn random_raw_frame(rng: &mut ChaCha8Rng, index: u32) -> FrameRecord {
    let n_gt = rng.random_range(0..=3);
    let gts: Vec<GroundTruth> = (0..n_gt)
        .map(|_| {
            let (x, y) = (rng.random_range(0.0..500.0), rng.random_range(0.0..350.0));
            let (w, h) = (rng.random_range(20.0..130.0), rng.random_range(20.0..120.0));
            gt(BBox::new(x, y, x + w, y + h), rng.random_range(1..=2))
        })
        .collect();
    let mut outputs = BTreeMap::new();
    for c in all_configs() {
        let n_det = rng.random_range(0..=4);
        let dets = (0..n_det)
            .map(|_| {
                let score = f64::from(rng.random_range(0..5u32)) / 4.0;
                if !gts.is_empty() && rng.random_bool(0.7) {
                    let g = &gts[rng.random_range(0..gts.len())];
                    let shift = rng.random_range(0.0..0.5) * (g.bbox.x_max - g.bbox.x_min);
                    let category = if rng.random_bool(0.9) { g.category.0 } else { 3 - g.category.0 };
                    det(
                        BBox::new(g.bbox.x_min + shift, g.bbox.y_min, g.bbox.x_max + shift, g.bbox.y_max),
                        score,
                        category,
                    )
                } else {
                    let (x, y) = (rng.random_range(0.0..580.0), rng.random_range(0.0..420.0));
                    det(BBox::new(x, y, x + 40.0, y + 40.0), score, rng.random_range(1..=2))
                }
            })
            .collect();
        outputs.insert(c, dets);
    }
    FrameRecord { video: "raw".into(), frame: index, width: 640, height: 480, gts, outputs, sparse: false }
}

/// Scene with several videos of mixed categories and random size drift.
pub fn random_scenario(seed: u64, videos: usize, frames: u32, split: Split) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs = (0..videos)
        .map(|v| {
            let n = rng.random_range(1..=3);
            let objects = (0..n)
                .map(|_| {
                    let point = |rng: &mut ChaCha8Rng| {
                        let h: f64 = rng.random_range(8.0..260.0);
                        let w: f64 = (h * rng.random_range(0.5..1.8)).min(600.0);
                        TrackPoint {
                            center: [
                                rng.random_range(w / 2.0..=640.0 - w / 2.0),
                                rng.random_range(h / 2.0..=480.0 - h / 2.0),
                            ],
                            size: [w, h],
                        }
                    };
                    let start = point(&mut rng);
                    let end = point(&mut rng);
                    ObjectTrack {
                        category: CategoryId(rng.random_range(1..=4)),
                        start,
                        end,
                        first_frame: None,
                        last_frame: None,
                    }
                })
                .collect();
            VideoSpec { id: format!("v{v:02}"), frames, width: 640, height: 480, objects }
        })
        .collect();
    Scenario { detector: "faster-rcnn".into(), split, grid: GridSpec::default(), emulator: None, videos: specs }
}

pub fn default_grid() -> ConfigGrid {
    ConfigGrid::default()
}
