//! Box geometry, detection matching, per-image AP, and per-category mAP.

mod ap;
mod bbox;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{DsaError, Result};
use crate::lattice::ApproxConfig;
use crate::trace::DetectionTrace;

pub use ap::{
    average_precision, image_ap, match_detections, score_order, Detection, GroundTruth, DEFAULT_IOU_THRESHOLD,
};
pub use bbox::{iou, BBox};

/// Object category label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryId(pub u32);

impl fmt::Display for CategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Mean of the defined per-image APs for `category` under `config`.
pub fn category_map(
    trace: &DetectionTrace,
    config: ApproxConfig,
    category: CategoryId,
    iou_threshold: f64,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for frame in trace.frames() {
        if !frame.has_category(category) {
            continue;
        }
        let dets = frame.detections(config)?;
        if let Some(ap) = image_ap(dets, &frame.gts, category, iou_threshold) {
            sum += ap;
            n += 1;
        }
    }
    if n == 0 {
        Err(DsaError::NoFrames(category))
    } else {
        Ok(sum / n as f64)
    }
}

/// Accuracy of every config relative to the baseline, for one category.
#[derive(Debug, Clone, PartialEq)]
pub struct ApGridReport {
    pub detector: String,
    pub category: CategoryId,
    pub heights: Vec<u32>,
    pub proposals: Vec<u32>,
    pub baseline_map: f64,
    /// Row-major over `heights` × `proposals`; `None` when degenerate.
    pub cells: Vec<Option<f64>>,
}

impl ApGridReport {
    /// Baseline mAP was zero; no cell is defined.
    pub fn is_degenerate(&self) -> bool {
        self.cells.iter().all(Option::is_none)
    }

    pub fn cell(&self, config: ApproxConfig) -> Option<f64> {
        let hi = self.heights.iter().position(|&h| h == config.image_height)?;
        let pi = self.proposals.iter().position(|&p| p == config.proposal_count)?;
        self.cells[hi * self.proposals.len() + pi]
    }

    /// Rows are image heights (descending), columns proposal counts
    /// (descending); cells carry 4 decimals, `NA` when undefined.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        write_config_table(sink, &self.heights, &self.proposals, |i| match self.cells[i] {
            Some(v) => format!("{v:.4}"),
            None => "NA".to_string(),
        })
    }
}

pub(crate) fn write_config_table<W: Write>(
    sink: W,
    heights: &[u32],
    proposals: &[u32],
    cell: impl Fn(usize) -> String,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec!["height".to_string()];
    header.extend(proposals.iter().map(u32::to_string));
    w.write_record(&header)?;
    for (hi, h) in heights.iter().enumerate() {
        let mut row = vec![h.to_string()];
        row.extend((0..proposals.len()).map(|pi| cell(hi * proposals.len() + pi)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Normalized AP over the whole grid: each cell is the config's category
/// mAP divided by the baseline's.
pub fn normalized_ap_grid(trace: &DetectionTrace, category: CategoryId, iou_threshold: f64) -> Result<ApGridReport> {
    trace.require_dense()?;
    let grid = &trace.grid;
    let baseline_map = category_map(trace, grid.baseline(), category, iou_threshold)?;
    let cells = if baseline_map > 0.0 {
        grid.configs()
            .iter()
            .map(|&c| {
                if c == grid.baseline() {
                    Ok(Some(1.0))
                } else {
                    category_map(trace, c, category, iou_threshold).map(|m| Some(m / baseline_map))
                }
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![None; grid.len()]
    };
    Ok(ApGridReport {
        detector: trace.detector.clone(),
        category,
        heights: grid.heights().to_vec(),
        proposals: grid.proposals().to_vec(),
        baseline_map,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{enumerate_grid, ConfigGrid};
    use crate::trace::{FrameRecord, Split, Video};
    use std::collections::BTreeMap;

    const CAT: CategoryId = CategoryId(1);

    fn gt_box() -> BBox {
        BBox::new(10.0, 10.0, 60.0, 60.0)
    }

    fn frame(i: u32, grid: &ConfigGrid, dets_for: impl Fn(ApproxConfig) -> Vec<Detection>) -> FrameRecord {
        FrameRecord {
            video: "v".into(),
            frame: i,
            width: 640,
            height: 480,
            gts: vec![GroundTruth { bbox: gt_box(), category: CAT }],
            outputs: grid.configs().iter().map(|&c| (c, dets_for(c))).collect::<BTreeMap<_, _>>(),
            sparse: false,
        }
    }

    fn hit() -> Vec<Detection> {
        vec![Detection { bbox: gt_box(), score: 0.9, category: CAT }]
    }

    fn trace_of(frames: Vec<FrameRecord>, grid: ConfigGrid) -> DetectionTrace {
        DetectionTrace {
            detector: "test".into(),
            grid,
            split: Split::Test,
            videos: vec![Video { id: "v".into(), frames }],
        }
    }

    #[test]
    fn perfect_and_half_traces() {
        let grid = enumerate_grid();
        let all = trace_of((0..4).map(|i| frame(i, &grid, |_| hit())).collect(), grid.clone());
        assert_eq!(category_map(&all, grid.baseline(), CAT, 0.5).unwrap(), 1.0);

        let half = trace_of(
            (0..4).map(|i| frame(i, &grid, |_| if i % 2 == 0 { hit() } else { vec![] })).collect(),
            grid.clone(),
        );
        assert_eq!(category_map(&half, grid.baseline(), CAT, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn absent_category_is_explicit() {
        let grid = enumerate_grid();
        let t = trace_of(vec![frame(0, &grid, |_| hit())], grid.clone());
        assert!(matches!(category_map(&t, grid.baseline(), CategoryId(9), 0.5), Err(DsaError::NoFrames(_))));
    }

    #[test]
    fn identical_configs_give_unit_grid() {
        let grid = enumerate_grid();
        let t = trace_of((0..3).map(|i| frame(i, &grid, |_| hit())).collect(), grid.clone());
        let report = normalized_ap_grid(&t, CAT, 0.5).unwrap();
        assert!(report.cells.iter().all(|c| *c == Some(1.0)));
        assert!(!report.is_degenerate());
    }

    #[test]
    fn degenerate_baseline() {
        let grid = enumerate_grid();
        let t = trace_of(vec![frame(0, &grid, |_| vec![])], grid.clone());
        let report = normalized_ap_grid(&t, CAT, 0.5).unwrap();
        assert!(report.is_degenerate());
        let mut out = Vec::new();
        report.write_csv(&mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().lines().nth(1).unwrap().starts_with("480,NA,NA"));
    }

    #[test]
    fn csv_layout() {
        let grid = ConfigGrid::new(&[480, 80], &[300, 10]).unwrap();
        let t = trace_of(
            vec![frame(0, &grid, |c| if c.image_height == 480 { hit() } else { vec![] }), frame(1, &grid, |_| hit())],
            grid,
        );
        let report = normalized_ap_grid(&t, CAT, 0.5).unwrap();
        let mut out = Vec::new();
        report.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "height,300,10\n480,1.0000,1.0000\n80,0.5000,0.5000\n");
    }
}
