//! Throughput lookup tables.
//!
//! The two embedded tables are end-to-end frames-per-second measurements of
//! Faster R-CNN (ZF) and R-FCN (ResNet-50) on a Tegra X1, one cell per
//! (image height, proposal count).

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::Deserialize;

use crate::error::{DsaError, Result};
use crate::lattice::{ApproxConfig, ConfigGrid, DEFAULT_HEIGHTS, DEFAULT_PROPOSALS};

/// Measured cost of one controller decision (feature extraction plus two
/// polynomial evaluations).
pub const DEFAULT_OVERHEAD_MS: f64 = 3.2;

// rows follow DEFAULT_HEIGHTS (480 → 80), columns DEFAULT_PROPOSALS (300 → 10)
const FASTER_RCNN_FPS: [[f64; 5]; 11] = [
    [2.08, 2.11, 2.54, 3.28, 3.91],
    [2.21, 2.25, 2.74, 3.66, 4.42],
    [2.36, 2.39, 2.94, 3.99, 5.01],
    [2.56, 2.57, 3.27, 4.51, 5.74],
    [2.65, 2.71, 3.47, 4.81, 6.37],
    [2.85, 2.92, 3.80, 5.72, 7.53],
    [3.03, 3.08, 4.14, 6.53, 9.14],
    [3.25, 3.31, 4.45, 7.27, 10.65],
    [4.12, 3.42, 4.76, 8.28, 13.70],
    [5.89, 5.73, 5.13, 9.37, 16.18],
    [8.98, 9.22, 9.26, 9.76, 17.88],
];

const RFCN_FPS: [[f64; 5]; 11] = [
    [1.27, 1.29, 1.29, 1.30, 1.30],
    [1.45, 1.47, 1.48, 1.48, 1.48],
    [1.73, 1.74, 1.75, 1.75, 1.76],
    [2.18, 2.19, 2.21, 2.22, 2.21],
    [2.64, 2.66, 2.66, 2.67, 2.69],
    [3.26, 3.30, 3.32, 3.34, 3.34],
    [4.28, 4.35, 4.39, 4.37, 4.41],
    [5.36, 5.35, 5.50, 5.49, 5.45],
    [7.61, 7.73, 7.71, 7.85, 7.64],
    [11.39, 11.12, 11.37, 10.97, 11.51],
    [12.56, 13.12, 13.25, 13.02, 13.04],
];

/// Frames-per-second per config, plus the per-decision controller cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub detector: String,
    fps: BTreeMap<ApproxConfig, f64>,
    pub overhead_ms: f64,
}

impl CostModel {
    pub fn new(detector: impl Into<String>, fps: BTreeMap<ApproxConfig, f64>, overhead_ms: f64) -> Result<Self> {
        let detector = detector.into();
        if let Some((c, v)) = fps.iter().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(DsaError::InvalidCostModel {
                detector,
                message: format!("fps at {c} must be positive, got {v}"),
            });
        }
        if !(overhead_ms.is_finite() && overhead_ms >= 0.0) {
            return Err(DsaError::InvalidCostModel {
                detector,
                message: format!("overhead {overhead_ms} ms is invalid"),
            });
        }
        Ok(Self { detector, fps, overhead_ms })
    }

    fn from_table(detector: &str, table: &[[f64; 5]; 11]) -> Self {
        let fps = DEFAULT_HEIGHTS
            .iter()
            .zip(table)
            .flat_map(|(&h, row)| DEFAULT_PROPOSALS.iter().zip(row).map(move |(&p, &v)| (ApproxConfig::new(h, p), v)))
            .collect();
        Self { detector: detector.to_string(), fps, overhead_ms: DEFAULT_OVERHEAD_MS }
    }

    pub fn faster_rcnn() -> Self {
        Self::from_table("faster-rcnn", &FASTER_RCNN_FPS)
    }

    pub fn rfcn() -> Self {
        Self::from_table("rfcn", &RFCN_FPS)
    }

    /// Embedded table by name (`faster-rcnn` or `rfcn`).
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "faster-rcnn" | "faster_rcnn" | "frcnn" => Some(Self::faster_rcnn()),
            "rfcn" | "r-fcn" => Some(Self::rfcn()),
            _ => None,
        }
    }

    /// Loads `height,proposals,fps` rows (with a header line).
    pub fn from_csv<R: Read>(detector: &str, source: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            height: u32,
            proposals: u32,
            fps: f64,
        }
        let mut fps = BTreeMap::new();
        for row in csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source).deserialize() {
            let row: Row = row?;
            let config = ApproxConfig::new(row.height, row.proposals);
            if fps.insert(config, row.fps).is_some() {
                return Err(DsaError::InvalidCostModel {
                    detector: detector.to_string(),
                    message: format!("config {config} listed twice"),
                });
            }
        }
        Self::new(detector, fps, DEFAULT_OVERHEAD_MS)
    }

    pub fn with_overhead(mut self, overhead_ms: f64) -> Self {
        self.overhead_ms = overhead_ms;
        self
    }

    /// Exact table value; configs outside the table are rejected.
    pub fn fps_lookup(&self, config: ApproxConfig) -> Result<f64> {
        self.fps.get(&config).copied().ok_or(DsaError::OffGrid(config))
    }

    /// Seconds to process one frame at `config`.
    pub fn frame_time(&self, config: ApproxConfig) -> Result<f64> {
        Ok(1.0 / self.fps_lookup(config)?)
    }

    pub fn overhead_seconds(&self) -> f64 {
        self.overhead_ms / 1000.0
    }

    /// One decision's cost as a fraction of a frame at `config`.
    pub fn overhead_fraction(&self, config: ApproxConfig) -> Result<f64> {
        Ok(self.overhead_seconds() / self.frame_time(config)?)
    }

    /// Fails unless every grid config has an entry.
    pub fn covers(&self, grid: &ConfigGrid) -> Result<()> {
        match grid.configs().iter().find(|c| !self.fps.contains_key(c)) {
            Some(c) => Err(DsaError::InvalidCostModel {
                detector: self.detector.clone(),
                message: format!("no entry for grid config {c}"),
            }),
            None => Ok(()),
        }
    }

    /// Throughput table laid out like the AP grids (2 decimals).
    pub fn write_fps_table<W: Write>(&self, grid: &ConfigGrid, sink: W) -> Result<()> {
        self.covers(grid)?;
        let configs = grid.configs();
        crate::metrics::write_config_table(sink, grid.heights(), grid.proposals(), |i| {
            format!("{:.2}", self.fps[&configs[i]])
        })
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["height", "proposals", "fps"])?;
        for (c, v) in self.fps.iter().rev() {
            w.write_record([c.image_height.to_string(), c.proposal_count.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
