//! The AutoFocus controller.
//!
//! The category and size of what is in view are unknown before a frame is
//! processed, so the controller assumes the next frames look like the most
//! recent completed one. It keeps that frame's detections scoring at least
//! the confidence threshold, summarizes them as a [`FeatureVector`], and
//! evaluates two polynomial regressors (image height and proposal count)
//! whose outputs are rounded onto the grid. A prediction is held for
//! `decision_window` frames. Without trusted detections the controller runs
//! the baseline.

use std::fmt::Write as _;

use super::features::{extract_features, FeatureVector};
use super::regressor::{fit_regressor, predict, Weights, BASIS_LEN};
use crate::error::{DsaError, Result};
use crate::lattice::{ApproxConfig, ConfigGrid};
use crate::metrics::{Detection, DEFAULT_IOU_THRESHOLD};
use crate::oracle::optimal_config;
use crate::simulator::CostModel;
use crate::trace::DetectionTrace;
use crate::Scope;

pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.6;
pub const DEFAULT_DECISION_WINDOW: u32 = 3;

const FORMAT_HEADER: &str = "autofocus-model 1";
const BASIS_LINE: &str = "basis bias+per-feature-powers degree=4 features=min_roi_height,min_roi_width,max_roi_height,max_roi_width,roi_count";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AutoFocusParams {
    pub confidence_threshold: f64,
    pub decision_window: u32,
    pub iou_threshold: f64,
    /// Categories whose accuracy the training labels protect.
    pub scope: Scope,
}

impl Default for AutoFocusParams {
    fn default() -> Self {
        Self {
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            decision_window: DEFAULT_DECISION_WINDOW,
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            scope: Scope::Any,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoFocusModel {
    pub grid: ConfigGrid,
    pub height_weights: Weights,
    pub proposal_weights: Weights,
    pub confidence_threshold: f64,
    pub decision_window: u32,
}

impl AutoFocusModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(DsaError::InvalidModel(format!("threshold {} outside [0, 1]", self.confidence_threshold)));
        }
        if self.decision_window == 0 {
            return Err(DsaError::InvalidModel("decision window must be at least 1".into()));
        }
        if self.height_weights.iter().chain(&self.proposal_weights).any(|w| !w.is_finite()) {
            return Err(DsaError::InvalidModel("weights must be finite".into()));
        }
        Ok(())
    }

    /// Raw regressor outputs: (image height, proposal count).
    pub fn predict_raw(&self, features: &FeatureVector) -> (f64, f64) {
        (predict(&self.height_weights, features), predict(&self.proposal_weights, features))
    }

    pub fn predict(&self, features: &FeatureVector) -> Result<ApproxConfig> {
        let (h, p) = self.predict_raw(features);
        self.grid.nearest_config(h, p)
    }

    /// Versioned line-oriented text form; weights are written in shortest
    /// round-trip notation so parsing restores them bit for bit.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
        let join_u = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        writeln!(s, "{FORMAT_HEADER}").unwrap();
        writeln!(s, "{BASIS_LINE}").unwrap();
        writeln!(s, "heights {}", join_u(self.grid.heights())).unwrap();
        writeln!(s, "proposals {}", join_u(self.grid.proposals())).unwrap();
        writeln!(s, "threshold {}", self.confidence_threshold).unwrap();
        writeln!(s, "window {}", self.decision_window).unwrap();
        writeln!(s, "height_weights {}", join(&self.height_weights)).unwrap();
        writeln!(s, "proposal_weights {}", join(&self.proposal_weights)).unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| DsaError::InvalidModel(m);
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some(FORMAT_HEADER) {
            return Err(bad(format!("expected first line {FORMAT_HEADER:?}")));
        }
        if lines.next().map(str::trim) != Some(BASIS_LINE) {
            return Err(bad("unsupported basis specification".into()));
        }
        let mut field = |key: &str| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| bad(format!("missing {key} line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(bad(format!("expected {key} line, got {line:?}")));
            }
            Ok(parts.map(str::to_string).collect())
        };
        let ints = |v: Vec<String>| -> Result<Vec<u32>> {
            v.iter().map(|s| s.parse().map_err(|_| bad(format!("bad integer {s:?}")))).collect()
        };
        let floats = |v: Vec<String>| -> Result<Vec<f64>> {
            v.iter().map(|s| s.parse().map_err(|_| bad(format!("bad number {s:?}")))).collect()
        };
        let weights = |v: Vec<f64>| -> Result<Weights> {
            <Weights>::try_from(v.as_slice()).map_err(|_| bad(format!("expected {BASIS_LEN} weights, got {}", v.len())))
        };
        let single = |v: Vec<f64>, key: &str| -> Result<f64> {
            match v.as_slice() {
                [x] => Ok(*x),
                _ => Err(bad(format!("{key} takes exactly one value"))),
            }
        };

        let heights = ints(field("heights")?)?;
        let proposals = ints(field("proposals")?)?;
        let threshold = single(floats(field("threshold")?)?, "threshold")?;
        let window = ints(field("window")?)?;
        let height_weights = weights(floats(field("height_weights")?)?)?;
        let proposal_weights = weights(floats(field("proposal_weights")?)?)?;
        let [window] = window.as_slice() else {
            return Err(bad("window takes exactly one value".into()));
        };
        let model = AutoFocusModel {
            grid: ConfigGrid::new(&heights, &proposals)?,
            height_weights,
            proposal_weights,
            confidence_threshold: threshold,
            decision_window: *window,
        };
        model.validate()?;
        Ok(model)
    }
}

/// Fits the two regressors on a dense training trace. Features come from
/// each frame's baseline outputs; labels are the frame's oracle-optimal
/// config.
pub fn train_autofocus(trace: &DetectionTrace, cost: &CostModel, params: &AutoFocusParams) -> Result<AutoFocusModel> {
    trace.require_dense()?;
    cost.covers(&trace.grid)?;
    let baseline = trace.grid.baseline();
    let mut heights = Vec::new();
    let mut proposals = Vec::new();
    for frame in trace.frames() {
        let Some(features) =
            extract_features(frame.detections(baseline)?, frame.width, frame.height, params.confidence_threshold)
        else {
            continue;
        };
        let label = optimal_config(&trace.grid, frame, params.scope, cost, params.iou_threshold)?;
        heights.push((features, f64::from(label.image_height)));
        proposals.push((features, f64::from(label.proposal_count)));
    }
    if heights.is_empty() {
        return Err(DsaError::NoTrainingSamples);
    }
    let model = AutoFocusModel {
        grid: trace.grid.clone(),
        height_weights: fit_regressor(&heights)?,
        proposal_weights: fit_regressor(&proposals)?,
        confidence_threshold: params.confidence_threshold,
        decision_window: params.decision_window,
    };
    model.validate()?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
struct ObservedFrame {
    dets: Vec<Detection>,
    width: u32,
    height: u32,
}

/// Per-stream controller state.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    current: ApproxConfig,
    remaining: u32,
    last: Option<ObservedFrame>,
}

/// Outcome of one controller step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub config: ApproxConfig,
    /// The regressors ran on this step (the step that costs overhead).
    pub predicted: bool,
}

impl ControllerState {
    /// Fresh stream: nothing observed yet, baseline selected.
    pub fn new(grid: &ConfigGrid) -> Self {
        Self { current: grid.baseline(), remaining: 0, last: None }
    }

    pub fn current(&self) -> ApproxConfig {
        self.current
    }

    pub fn frames_remaining(&self) -> u32 {
        self.remaining
    }

    /// Records the outputs of the frame that just completed.
    pub fn observe(&mut self, dets: &[Detection], width: u32, height: u32) {
        self.last = Some(ObservedFrame { dets: dets.to_vec(), width, height });
    }

    pub fn decide(&mut self, model: &AutoFocusModel) -> Result<Decision> {
        if self.remaining > 0 {
            self.remaining -= 1;
            return Ok(Decision { config: self.current, predicted: false });
        }
        let features =
            self.last.as_ref().and_then(|o| extract_features(&o.dets, o.width, o.height, model.confidence_threshold));
        match features {
            None => {
                self.current = model.grid.baseline();
                Ok(Decision { config: self.current, predicted: false })
            }
            Some(f) => {
                self.current = model.predict(&f)?;
                self.remaining = model.decision_window - 1;
                Ok(Decision { config: self.current, predicted: true })
            }
        }
    }
}

/// Config for the next frame of the stream.
pub fn autofocus_decide(state: &mut ControllerState, model: &AutoFocusModel) -> Result<ApproxConfig> {
    state.decide(model).map(|d| d.config)
}
