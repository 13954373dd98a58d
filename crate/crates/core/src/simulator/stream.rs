use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::cost::CostModel;
use crate::error::{DsaError, Result};
use crate::lattice::{ApproxConfig, GridSpec};
use crate::metrics::{image_ap, CategoryId};
use crate::oracle::FrameChoice;
use crate::policy::{AutoFocusModel, ControllerState, StaticPolicy};
use crate::trace::DetectionTrace;

/// What picks the config for each frame.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Policy {
    /// Fixed config per category. The categories of each video are assumed
    /// known in advance.
    Static(StaticPolicy),
    /// Dynamic controller fed by the previous frames' observed outputs.
    AutoFocus(AutoFocusModel),
    /// Precomputed config per (video, frame), e.g. an oracle.
    Schedule(Vec<Vec<ApproxConfig>>),
}

impl Policy {
    pub fn always_baseline(trace: &DetectionTrace) -> Self {
        Policy::Static(StaticPolicy::oblivious(trace.grid.baseline()))
    }

    pub fn default_name(&self) -> &'static str {
        match self {
            Policy::Static(_) => "static",
            Policy::AutoFocus(_) => "autofocus",
            Policy::Schedule(_) => "schedule",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryOutcome {
    pub category: CategoryId,
    /// Frames of the videos this category appears in.
    pub frames: usize,
    pub time: f64,
    pub baseline_time: f64,
    pub speedup: f64,
    pub map: f64,
    pub baseline_map: f64,
    /// `(baseline − policy) / baseline`; absent when the baseline mAP is 0.
    pub degradation: Option<f64>,
}

/// Outcome of replaying one trace under one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamResult {
    pub policy: String,
    pub detector: String,
    /// SHA-256 over the canonical trace text and the cost model; results
    /// are only comparable when these agree.
    pub inputs_digest: String,
    pub grid: GridSpec,
    /// Regressor invocations, each charged the controller overhead.
    pub decisions: usize,
    pub total_time: f64,
    pub baseline_time: f64,
    pub speedup: f64,
    /// Mean over categories of category mAP.
    pub map: Option<f64>,
    pub baseline_map: Option<f64>,
    pub degradation: Option<f64>,
    pub categories: Vec<CategoryOutcome>,
    pub choices: Vec<FrameChoice>,
}

impl StreamResult {
    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.policy = name.into();
        self
    }

    pub fn category(&self, category: CategoryId) -> Option<&CategoryOutcome> {
        self.categories.iter().find(|c| c.category == category)
    }
}

pub fn degradation(baseline_map: f64, map: f64) -> Option<f64> {
    (baseline_map > 0.0).then(|| (baseline_map - map) / baseline_map)
}

pub(crate) fn inputs_digest(trace: &DetectionTrace, cost: &CostModel) -> Result<String> {
    let mut hasher = Sha256::new();
    hasher.update(crate::trace::trace_to_string(trace).as_bytes());
    let mut table = Vec::new();
    cost.write_csv(&mut table)?;
    hasher.update(cost.detector.as_bytes());
    hasher.update(&table);
    hasher.update(cost.overhead_ms.to_le_bytes());
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Default)]
struct Tally {
    frames: usize,
    time: f64,
    baseline_time: f64,
    ap_sum: f64,
    baseline_ap_sum: f64,
    ap_count: usize,
}

/// Replays `trace` frame by frame. The chosen config decides which stored
/// outputs are observed; those outputs are scored and, for AutoFocus, fed
/// back to the controller. Each frame costs `1/fps(chosen)`; each
/// regressor invocation adds the cost model's overhead.
pub fn simulate_stream(
    trace: &DetectionTrace,
    policy: &Policy,
    cost: &CostModel,
    iou_threshold: f64,
) -> Result<StreamResult> {
    trace.require_dense()?;
    cost.covers(&trace.grid)?;
    let grid = &trace.grid;
    let baseline = grid.baseline();
    let base_frame_time = cost.frame_time(baseline)?;

    match policy {
        Policy::Static(p) => p.validate(grid)?,
        Policy::AutoFocus(m) => {
            m.validate()?;
            if &m.grid != grid {
                return Err(DsaError::InvalidModel("model grid differs from the trace grid".into()));
            }
        }
        Policy::Schedule(s) => {
            let shape_ok = s.len() == trace.videos.len()
                && s.iter().zip(&trace.videos).all(|(row, v)| row.len() == v.frames.len());
            if !shape_ok {
                return Err(DsaError::InvalidModel("schedule does not match the trace's videos and frames".into()));
            }
        }
    }

    let mut tallies: BTreeMap<CategoryId, Tally> =
        trace.categories().into_iter().map(|c| (c, Tally::default())).collect();
    let mut choices = Vec::with_capacity(trace.frame_count());
    let (mut total_time, mut baseline_time, mut decisions) = (0.0, 0.0, 0usize);

    for (vi, video) in trace.videos.iter().enumerate() {
        let video_categories = video.categories();
        let mut controller = ControllerState::new(grid);
        for (fi, frame) in video.frames.iter().enumerate() {
            let (config, predicted) = match policy {
                Policy::Static(p) => (p.config_for(&video_categories, grid), false),
                Policy::AutoFocus(m) => {
                    let d = controller.decide(m)?;
                    (d.config, d.predicted)
                }
                Policy::Schedule(s) => (s[vi][fi], false),
            };
            // an off-grid choice here is a policy bug, not an input problem
            grid.check(config)?;
            let observed = frame.detections(config)?;

            let mut frame_time = cost.frame_time(config)?;
            if predicted {
                frame_time += cost.overhead_seconds();
                decisions += 1;
            }
            total_time += frame_time;
            baseline_time += base_frame_time;

            for &cat in &video_categories {
                let t = tallies.get_mut(&cat).expect("video categories are trace categories");
                t.frames += 1;
                t.time += frame_time;
                t.baseline_time += base_frame_time;
                if let Some(ap) = image_ap(observed, &frame.gts, cat, iou_threshold) {
                    let base_ap = image_ap(frame.detections(baseline)?, &frame.gts, cat, iou_threshold)
                        .expect("category present in this frame");
                    t.ap_sum += ap;
                    t.baseline_ap_sum += base_ap;
                    t.ap_count += 1;
                }
            }

            if let Policy::AutoFocus(_) = policy {
                controller.observe(observed, frame.width, frame.height);
            }
            choices.push(FrameChoice { video: video.id.clone(), frame: frame.frame, config });
        }
    }

    let categories: Vec<CategoryOutcome> = tallies
        .into_iter()
        .map(|(category, t)| {
            let n = t.ap_count as f64;
            let (map, baseline_map) = (t.ap_sum / n, t.baseline_ap_sum / n);
            CategoryOutcome {
                category,
                frames: t.frames,
                time: t.time,
                baseline_time: t.baseline_time,
                speedup: t.baseline_time / t.time,
                map,
                baseline_map,
                degradation: degradation(baseline_map, map),
            }
        })
        .collect();

    let mean = |f: fn(&CategoryOutcome) -> f64| {
        (!categories.is_empty()).then(|| categories.iter().map(f).sum::<f64>() / categories.len() as f64)
    };
    let map = mean(|c| c.map);
    let baseline_map = mean(|c| c.baseline_map);

    Ok(StreamResult {
        policy: policy.default_name().to_string(),
        detector: cost.detector.clone(),
        inputs_digest: inputs_digest(trace, cost)?,
        grid: grid.spec(),
        decisions,
        total_time,
        baseline_time,
        speedup: baseline_time / total_time,
        map,
        baseline_map,
        degradation: baseline_map.zip(map).and_then(|(b, m)| degradation(b, m)),
        categories,
        choices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{train_autofocus, AutoFocusParams};
    use crate::trace::{drifting_scenario, generate_synthetic, EmulatorParams, Split};

    fn trace(split: Split) -> DetectionTrace {
        let params = EmulatorParams { clutter_rate: 1.0, seed: 3, ..EmulatorParams::default() };
        generate_synthetic(&drifting_scenario("faster-rcnn", split, 3, 6, 12), &params).unwrap()
    }

    #[test]
    fn always_baseline_is_exactly_one() {
        let t = trace(Split::Test);
        let r = simulate_stream(&t, &Policy::always_baseline(&t), &CostModel::faster_rcnn(), 0.5).unwrap();
        assert_eq!(r.speedup, 1.0);
        assert_eq!(r.map, r.baseline_map);
        assert_eq!(r.degradation, Some(0.0));
        assert_eq!(r.decisions, 0);
        assert!(r.categories.iter().all(|c| c.speedup == 1.0 && c.degradation == Some(0.0)));
    }

    #[test]
    fn constant_policy_speedup_is_a_table_ratio() {
        let t = trace(Split::Test);
        let cost = CostModel::faster_rcnn().with_overhead(0.0);
        let p = Policy::Static(StaticPolicy::oblivious(ApproxConfig::new(160, 50)));
        let r = simulate_stream(&t, &p, &cost, 0.5).unwrap();
        assert!((r.speedup / (8.28 / 2.08) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn time_is_frame_costs_plus_decision_overhead() {
        let (train, test) = (trace(Split::Train), trace(Split::Test));
        let cost = CostModel::faster_rcnn();
        let model = train_autofocus(&train, &cost, &AutoFocusParams::default()).unwrap();
        let r = simulate_stream(&test, &Policy::AutoFocus(model), &cost, 0.5).unwrap();
        let frames: f64 = r.choices.iter().map(|c| cost.frame_time(c.config).unwrap()).sum();
        let expected = frames + r.decisions as f64 * cost.overhead_seconds();
        assert!((r.total_time - expected).abs() < 1e-9);
        assert!(r.decisions > 0);
        // at most one decision per window of three frames
        assert!(r.decisions <= test.frame_count().div_ceil(3));
    }

    #[test]
    fn replay_is_deterministic() {
        let (train, test) = (trace(Split::Train), trace(Split::Test));
        let cost = CostModel::faster_rcnn();
        let model = train_autofocus(&train, &cost, &AutoFocusParams::default()).unwrap();
        let p = Policy::AutoFocus(model);
        assert_eq!(simulate_stream(&test, &p, &cost, 0.5).unwrap(), simulate_stream(&test, &p, &cost, 0.5).unwrap());
    }

    #[test]
    fn rejects_bad_schedules_and_sparse_traces() {
        let mut t = trace(Split::Test);
        let cost = CostModel::faster_rcnn();
        let mut schedule: Vec<Vec<ApproxConfig>> =
            t.videos.iter().map(|v| vec![t.grid.baseline(); v.frames.len()]).collect();
        schedule[0][0] = ApproxConfig::new(470, 300);
        let err = simulate_stream(&t, &Policy::Schedule(schedule.clone()), &cost, 0.5).unwrap_err();
        assert!(matches!(err, DsaError::OffGrid(_)));
        schedule[0].pop();
        assert!(simulate_stream(&t, &Policy::Schedule(schedule), &cost, 0.5).is_err());

        let first = t.videos[0].frames[0].outputs.keys().next().copied().unwrap();
        t.videos[0].frames[0].outputs.remove(&first);
        t.videos[0].frames[0].sparse = true;
        assert!(simulate_stream(&t, &Policy::always_baseline(&t), &cost, 0.5).is_err());
    }

    #[test]
    fn degradation_of_zero_baseline_is_undefined() {
        assert_eq!(degradation(0.0, 0.0), None);
        assert_eq!(degradation(0.5, 0.25), Some(0.5));
    }
}
