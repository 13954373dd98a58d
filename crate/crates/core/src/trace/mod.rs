//! Detection traces: per-frame ground truth plus the detector's output under
//! every configuration of the lattice.
//!
//! A trace stands in for the detector. Anything that needs to know "what
//! would the detector have reported at (h, p)" looks it up here.

mod emulator;
mod io;
mod scenario;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DsaError, Result};
use crate::lattice::{ApproxConfig, ConfigGrid};
use crate::metrics::{CategoryId, Detection, GroundTruth};

pub use emulator::{emulate_detection, EmulatorParams};
pub use io::{load_trace, save_trace, trace_to_string};
pub use scenario::{drifting_scenario, generate_synthetic, ObjectTrack, Scenario, TrackPoint, VideoSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// One video frame: ground truth and stored detector outputs keyed by config.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub video: String,
    pub frame: u32,
    pub width: u32,
    pub height: u32,
    pub gts: Vec<GroundTruth>,
    pub outputs: BTreeMap<ApproxConfig, Vec<Detection>>,
    /// Sparse records may omit configs; oracle operations refuse them.
    pub sparse: bool,
}

impl FrameRecord {
    pub fn detections(&self, config: ApproxConfig) -> Result<&[Detection]> {
        match self.outputs.get(&config) {
            Some(d) => Ok(d),
            None if self.sparse => Err(DsaError::SparseFrame { video: self.video.clone(), frame: self.frame }),
            None => Err(DsaError::OffGrid(config)),
        }
    }

    pub fn has_category(&self, category: CategoryId) -> bool {
        self.gts.iter().any(|g| g.category == category)
    }

    pub fn categories(&self) -> BTreeSet<CategoryId> {
        self.gts.iter().map(|g| g.category).collect()
    }

    pub fn require_dense(&self) -> Result<()> {
        if self.sparse {
            Err(DsaError::SparseFrame { video: self.video.clone(), frame: self.frame })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Video {
    pub id: String,
    pub frames: Vec<FrameRecord>,
}

impl Video {
    /// Every category that appears in this video's ground truth.
    pub fn categories(&self) -> BTreeSet<CategoryId> {
        self.frames.iter().flat_map(|f| f.gts.iter().map(|g| g.category)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionTrace {
    pub detector: String,
    pub grid: ConfigGrid,
    pub split: Split,
    pub videos: Vec<Video>,
}

impl DetectionTrace {
    pub fn frames(&self) -> impl Iterator<Item = &FrameRecord> {
        self.videos.iter().flat_map(|v| v.frames.iter())
    }

    pub fn frame_count(&self) -> usize {
        self.videos.iter().map(|v| v.frames.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.frame_count() == 0
    }

    pub fn categories(&self) -> BTreeSet<CategoryId> {
        self.frames().flat_map(|f| f.gts.iter().map(|g| g.category)).collect()
    }

    pub fn is_dense(&self) -> bool {
        self.frames().all(|f| !f.sparse)
    }

    pub fn require_dense(&self) -> Result<()> {
        self.frames().try_for_each(FrameRecord::require_dense)
    }

    /// Frames of every video in which `category` appears at least once.
    /// These are the frames a category-scoped stream is charged for.
    pub fn category_frames(&self, category: CategoryId) -> impl Iterator<Item = &FrameRecord> {
        self.videos
            .iter()
            .filter(move |v| v.frames.iter().any(|f| f.has_category(category)))
            .flat_map(|v| v.frames.iter())
    }

    /// Re-runs the structural checks performed on load.
    pub fn validate(&self) -> Result<()> {
        io::validate_trace(self)
    }
}
