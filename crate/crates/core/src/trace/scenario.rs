//! Scene descriptions and the synthetic trace generator.
//!
//! Randomness is ChaCha8 (`rand_chacha`) seeded through `seed_from_u64` with
//! a SplitMix64-derived seed per (video, frame, stream). Every random draw is
//! therefore addressable and independent of generation order, so traces are
//! identical across platforms and thread counts.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::emulator::{emulate_detection, EmulatorParams};
use super::{DetectionTrace, FrameRecord, Split, Video};
use crate::error::{DsaError, Result};
use crate::lattice::{ConfigGrid, GridSpec};
use crate::metrics::{BBox, CategoryId, Detection, GroundTruth};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackPoint {
    pub center: [f64; 2],
    pub size: [f64; 2],
}

/// An object moving linearly between two key points. Outside
/// `[first_frame, last_frame]` the object is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectTrack {
    pub category: CategoryId,
    pub start: TrackPoint,
    pub end: TrackPoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_frame: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_frame: Option<u32>,
}

impl ObjectTrack {
    fn box_at(&self, frame: u32, frames: u32) -> Option<BBox> {
        let first = self.first_frame.unwrap_or(0);
        let last = self.last_frame.unwrap_or(frames.saturating_sub(1));
        if frame < first || frame > last {
            return None;
        }
        let t = if last > first { f64::from(frame - first) / f64::from(last - first) } else { 0.0 };
        let lerp = |a: f64, b: f64| a + (b - a) * t;
        Some(BBox::from_center(
            lerp(self.start.center[0], self.end.center[0]),
            lerp(self.start.center[1], self.end.center[1]),
            lerp(self.start.size[0], self.end.size[0]),
            lerp(self.start.size[1], self.end.size[1]),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoSpec {
    pub id: String,
    pub frames: u32,
    #[serde(default = "default_width")]
    pub width: u32,
    #[serde(default = "default_height")]
    pub height: u32,
    pub objects: Vec<ObjectTrack>,
}

fn default_width() -> u32 {
    640
}

fn default_height() -> u32 {
    480
}

/// A scene file: which videos to synthesize and what moves through them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub detector: String,
    pub split: Split,
    #[serde(default)]
    pub grid: GridSpec,
    /// Emulator settings to use when the caller does not supply its own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emulator: Option<EmulatorParams>,
    pub videos: Vec<VideoSpec>,
}

impl Scenario {
    pub fn categories(&self) -> BTreeSet<CategoryId> {
        self.videos.iter().flat_map(|v| v.objects.iter().map(|o| o.category)).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.videos.is_empty() || self.videos.iter().all(|v| v.frames == 0) {
            return Err(DsaError::Empty("scenario has no frames"));
        }
        let mut ids = BTreeSet::new();
        for v in &self.videos {
            if !ids.insert(v.id.as_str()) {
                return Err(DsaError::InvalidScenario(format!("duplicate video id {}", v.id)));
            }
            if v.width == 0 || v.height == 0 {
                return Err(DsaError::InvalidScenario(format!("video {}: frame size must be positive", v.id)));
            }
            for o in &v.objects {
                let finite = o.start.center.iter().chain(&o.start.size).chain(&o.end.center).chain(&o.end.size);
                if finite.clone().any(|x| !x.is_finite()) || o.start.size.iter().chain(&o.end.size).any(|s| *s < 0.0) {
                    return Err(DsaError::InvalidScenario(format!("video {}: bad object track", v.id)));
                }
            }
        }
        Ok(())
    }
}

const STREAM_CLUTTER: u64 = 0x636c_7574;
const STREAM_OBJECT: u64 = 0x6f62_6a65;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(base), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

fn rng_for(base: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, path))
}

/// Synthesizes a dense trace over the scenario's grid.
///
/// Per config, the emitted list is the emulated true positives plus the
/// frame's clutter, ranked by score and cut to the top `proposal_count`.
/// Clutter is drawn once per frame and shared by every config.
pub fn generate_synthetic(scenario: &Scenario, params: &EmulatorParams) -> Result<DetectionTrace> {
    scenario.validate()?;
    params.validate()?;
    let grid = ConfigGrid::from_spec(&scenario.grid)?;
    let reference_height = grid.baseline().image_height;
    let categories: Vec<CategoryId> = scenario.categories().into_iter().collect();

    let mut videos = Vec::with_capacity(scenario.videos.len());
    for (vi, spec) in scenario.videos.iter().enumerate() {
        let (w, h) = (f64::from(spec.width), f64::from(spec.height));
        let mut frames = Vec::with_capacity(spec.frames as usize);
        for fi in 0..spec.frames {
            let gts: Vec<GroundTruth> = spec
                .objects
                .iter()
                .filter_map(|o| {
                    let b = o.box_at(fi, spec.frames)?.clip(w, h);
                    (b.area() > 0.0).then_some(GroundTruth { bbox: b, category: o.category })
                })
                .collect();

            let clutter = draw_clutter(
                params,
                &categories,
                (w, h),
                &mut rng_for(params.seed, &[vi as u64, u64::from(fi), STREAM_CLUTTER]),
            )?;

            // larger objects rank first among equal scores; they are the ones
            // that survive to smaller image heights, which keeps the detection
            // sets nested along the lattice
            let mut object_order: Vec<usize> = (0..gts.len()).collect();
            object_order.sort_by(|&a, &b| gts[b].bbox.height().total_cmp(&gts[a].bbox.height()));

            let mut outputs = BTreeMap::new();
            for &config in grid.configs() {
                let mut dets: Vec<Detection> = object_order
                    .iter()
                    .filter_map(|&gi| {
                        let mut rng = rng_for(params.seed, &[vi as u64, u64::from(fi), STREAM_OBJECT, gi as u64]);
                        emulate_detection(
                            &gts[gi],
                            config,
                            reference_height,
                            (spec.width, spec.height),
                            params,
                            &mut rng,
                        )
                    })
                    .collect();
                dets.extend(clutter.iter().cloned());
                dets.sort_by(|a, b| b.score.total_cmp(&a.score));
                dets.truncate(config.proposal_count as usize);
                outputs.insert(config, dets);
            }

            frames.push(FrameRecord {
                video: spec.id.clone(),
                frame: fi,
                width: spec.width,
                height: spec.height,
                gts,
                outputs,
                sparse: false,
            });
        }
        videos.push(Video { id: spec.id.clone(), frames });
    }

    Ok(DetectionTrace { detector: scenario.detector.clone(), grid, split: scenario.split, videos })
}

fn draw_clutter(
    params: &EmulatorParams,
    categories: &[CategoryId],
    (w, h): (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Detection>> {
    if params.clutter_rate == 0.0 {
        return Ok(Vec::new());
    }
    let count =
        Poisson::new(params.clutter_rate).map_err(|e| DsaError::InvalidParams(e.to_string()))?.sample(rng) as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let bw = rng.random_range(0.05..0.3) * w;
        let bh = rng.random_range(0.05..0.3) * h;
        let x0 = rng.random_range(0.0..(w - bw));
        let y0 = rng.random_range(0.0..(h - bh));
        let category =
            if categories.is_empty() { CategoryId(0) } else { categories[rng.random_range(0..categories.len())] };
        let score: f64 = rng.random_range(0.0..1.0);
        out.push(Detection { bbox: BBox::new(x0, y0, x0 + bw, y0 + bh), score, category });
    }
    Ok(out)
}

/// A ready-made scene with objects that grow or shrink over each video, in
/// three size classes: category 1 large, 2 medium, 3 small. Each video holds
/// one or two objects of a single category.
pub fn drifting_scenario(detector: &str, split: Split, seed: u64, videos: usize, frames: u32) -> Scenario {
    const SIZE_CLASSES: [(u32, f64, f64); 3] = [(1, 120.0, 300.0), (2, 50.0, 150.0), (3, 24.0, 70.0)];
    let split_tag = match split {
        Split::Train => 1,
        Split::Test => 2,
    };
    let (w, h) = (640.0, 480.0);
    let specs = (0..videos)
        .map(|vi| {
            let mut rng = rng_for(seed, &[split_tag, vi as u64]);
            let (category, lo, hi) = SIZE_CLASSES[vi % SIZE_CLASSES.len()];
            let n_objects = rng.random_range(1..=2);
            let objects = (0..n_objects)
                .map(|_| {
                    let start_h: f64 = rng.random_range(lo..hi);
                    let end_h = (start_h * rng.random_range(0.6..1.8)).clamp(lo * 0.6, hi * 1.2);
                    let aspect: f64 = rng.random_range(0.6..1.6);
                    let point = |rng: &mut ChaCha8Rng, height: f64| {
                        let bw = (height * aspect).min(w * 0.9);
                        let bh = height.min(h * 0.9);
                        TrackPoint {
                            center: [
                                rng.random_range(bw / 2.0..=w - bw / 2.0),
                                rng.random_range(bh / 2.0..=h - bh / 2.0),
                            ],
                            size: [bw, bh],
                        }
                    };
                    let start = point(&mut rng, start_h);
                    let end = point(&mut rng, end_h);
                    ObjectTrack { category: CategoryId(category), start, end, first_frame: None, last_frame: None }
                })
                .collect();
            VideoSpec { id: format!("{split}-{vi:03}"), frames, width: w as u32, height: h as u32, objects }
        })
        .collect();
    Scenario { detector: detector.to_string(), split, grid: GridSpec::default(), emulator: None, videos: specs }
}
