use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DsaError, Result};
use crate::lattice::ApproxConfig;
use crate::metrics::{iou, Detection, GroundTruth};

/// Parameters of the synthetic detector.
///
/// An object is found iff its height, rescaled to the configured image
/// height, reaches `theta` pixels. Localization error grows as the image
/// shrinks, scaled by `jitter`. `clutter_rate` is the mean number of
/// spurious detections per frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmulatorParams {
    pub theta: f64,
    #[serde(default)]
    pub clutter_rate: f64,
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for EmulatorParams {
    fn default() -> Self {
        Self { theta: 16.0, clutter_rate: 0.0, jitter: 0.0, seed: 0 }
    }
}

impl EmulatorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(DsaError::InvalidParams(format!("theta must be positive, got {}", self.theta)));
        }
        if !(self.clutter_rate.is_finite() && self.clutter_rate >= 0.0) {
            return Err(DsaError::InvalidParams(format!("clutter rate must be >= 0, got {}", self.clutter_rate)));
        }
        if !(self.jitter.is_finite() && self.jitter >= 0.0) {
            return Err(DsaError::InvalidParams(format!("jitter must be >= 0, got {}", self.jitter)));
        }
        Ok(())
    }
}

/// Emitted boxes keep at least this IoU with their object, so that every
/// emission is a true positive at the default matching threshold.
const MIN_EMITTED_IOU: f64 = 0.5 + 1e-6;

/// Synthetic detector response for one ground-truth object.
///
/// `reference_height` is the baseline image height the ground truth is
/// annotated at. The jitter direction is drawn from `rng`; callers that want
/// the same direction across configs reseed it per object.
pub fn emulate_detection<R: Rng + ?Sized>(
    gt: &GroundTruth,
    config: ApproxConfig,
    reference_height: u32,
    frame_size: (u32, u32),
    params: &EmulatorParams,
    rng: &mut R,
) -> Option<Detection> {
    let scale = f64::from(config.image_height) / f64::from(reference_height);
    let effective_height = gt.bbox.height() * scale;
    // direction is drawn unconditionally so the stream position does not
    // depend on whether this object was detected
    let ux: f64 = rng.random_range(-1.0..=1.0);
    let uy: f64 = rng.random_range(-1.0..=1.0);
    if effective_height < params.theta {
        return None;
    }
    let score = (0.5 + effective_height / (2.0 * params.theta)).min(1.0);

    let magnitude = params.jitter * (1.0 / scale - 1.0).max(0.0);
    let (dx, dy) = (ux * magnitude * gt.bbox.width(), uy * magnitude * gt.bbox.height());
    let mut bbox = gt.bbox.translate(dx, dy);
    if iou(&bbox, &gt.bbox) < MIN_EMITTED_IOU {
        // IoU of a translated copy falls monotonically with the shift length
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if iou(&gt.bbox.translate(dx * mid, dy * mid), &gt.bbox) >= MIN_EMITTED_IOU {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        bbox = gt.bbox.translate(dx * lo, dy * lo);
    }
    // ground truth lies inside the frame, so clipping cannot lower the IoU
    let bbox = bbox.clip(f64::from(frame_size.0), f64::from(frame_size.1));

    Some(Detection { bbox, score, category: gt.category })
}
