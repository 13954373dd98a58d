//! Category-aware domain-specific approximation for object detection.
//!
//! Two knobs trade detector accuracy for speed: the height the input image
//! is rescaled to and the number of region proposals kept. This crate
//! evaluates that trade-off from detection traces (stored detector outputs
//! under every knob setting), computes oracle limit studies, and replays
//! streams under static and dynamic (AutoFocus) selection policies, charging
//! time through a measured throughput table.
//!
//! Module map:
//! - [`lattice`]: the (height, proposals) configuration grid
//! - [`metrics`]: IoU, greedy matching, per-image AP, category mAP
//! - [`trace`]: trace file format, validation, synthetic generation
//! - [`oracle`]: safe sets, optimal configs, coverage curves, limit studies
//! - [`policy`]: static policies and the AutoFocus controller
//! - [`simulator`]: cost model, stream replay, comparison reports

pub mod error;
pub mod lattice;
pub mod metrics;
pub mod oracle;
pub mod policy;
pub mod simulator;
pub mod trace;

use std::fmt;
use std::str::FromStr;

pub use error::{DsaError, Result};
pub use lattice::{enumerate_grid, ApproxConfig, ConfigGrid};
pub use metrics::{BBox, CategoryId, Detection, GroundTruth};
pub use simulator::CostModel;
pub use trace::DetectionTrace;

/// Which categories a safety judgement covers: one category, or all of them
/// at once (category-oblivious).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    Any,
    Category(CategoryId),
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Any => f.write_str("any"),
            Scope::Category(c) => write!(f, "{c}"),
        }
    }
}

impl FromStr for Scope {
    type Err = DsaError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "any" {
            return Ok(Scope::Any);
        }
        s.parse::<u32>()
            .map(|id| Scope::Category(CategoryId(id)))
            .map_err(|_| DsaError::InvalidModel(format!("scope must be \"any\" or a category id, got {s:?}")))
    }
}
