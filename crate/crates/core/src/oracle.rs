//! Limit studies: what an omniscient selector could achieve.
//!
//! A config is *safe* for a frame (or a category over a whole trace) when
//! its AP is at least the baseline's. The *optimal* config is the safe one
//! with the highest throughput.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use crate::error::{DsaError, Result};
use crate::lattice::{ApproxConfig, ConfigGrid};
use crate::metrics::{category_map, image_ap, CategoryId};
use crate::simulator::CostModel;
use crate::trace::{DetectionTrace, FrameRecord};
use crate::Scope;

/// Configs that do not lose accuracy on one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SafeSet {
    pub video: String,
    pub frame: u32,
    /// Members in grid enumeration order.
    pub members: Vec<ApproxConfig>,
    /// Baseline AP for a single category; mean over present categories for
    /// [`Scope::Any`]. `None` on metric-neutral frames.
    pub baseline_ap: Option<f64>,
    /// No ground truth in scope: every config is safe.
    pub metric_neutral: bool,
}

impl SafeSet {
    pub fn contains(&self, config: ApproxConfig) -> bool {
        self.members.contains(&config)
    }
}

/// Per-image AP of `category` under every grid config, in grid order.
pub fn ap_profile(
    grid: &ConfigGrid,
    frame: &FrameRecord,
    category: CategoryId,
    iou_threshold: f64,
) -> Result<Vec<Option<f64>>> {
    frame.require_dense()?;
    grid.configs().iter().map(|&c| Ok(image_ap(frame.detections(c)?, &frame.gts, category, iou_threshold))).collect()
}

fn scope_categories(frame: &FrameRecord, scope: Scope) -> Vec<CategoryId> {
    match scope {
        Scope::Category(c) => {
            if frame.has_category(c) {
                vec![c]
            } else {
                vec![]
            }
        }
        Scope::Any => frame.categories().into_iter().collect(),
    }
}

/// Safe configs for one frame. Under [`Scope::Any`] a config must be safe
/// for every category present in the frame.
pub fn safe_set(grid: &ConfigGrid, frame: &FrameRecord, scope: Scope, iou_threshold: f64) -> Result<SafeSet> {
    frame.require_dense()?;
    let categories = scope_categories(frame, scope);
    let mut safe = vec![true; grid.len()];
    let mut baseline_sum = 0.0;
    let base_idx = grid.index_of(grid.baseline()).expect("baseline is a member");
    for &cat in &categories {
        let profile = ap_profile(grid, frame, cat, iou_threshold)?;
        let base = profile[base_idx].expect("category is present in the frame");
        baseline_sum += base;
        for (ok, ap) in safe.iter_mut().zip(&profile) {
            *ok &= ap.expect("category is present in the frame") >= base;
        }
    }
    Ok(SafeSet {
        video: frame.video.clone(),
        frame: frame.frame,
        members: grid.configs().iter().zip(&safe).filter(|(_, ok)| **ok).map(|(c, _)| *c).collect(),
        baseline_ap: (!categories.is_empty()).then(|| baseline_sum / categories.len() as f64),
        metric_neutral: categories.is_empty(),
    })
}

/// Highest-throughput config among `candidates`. Candidates are expected in
/// grid order, so ties go to the larger height, then more proposals.
pub fn fastest<'a>(
    candidates: impl IntoIterator<Item = &'a ApproxConfig>,
    cost: &CostModel,
) -> Result<Option<ApproxConfig>> {
    let mut best: Option<(ApproxConfig, f64)> = None;
    for &c in candidates {
        let fps = cost.fps_lookup(c)?;
        if best.is_none_or(|(_, b)| fps > b) {
            best = Some((c, fps));
        }
    }
    Ok(best.map(|(c, _)| c))
}

/// The fastest safe config for one frame.
pub fn optimal_config(
    grid: &ConfigGrid,
    frame: &FrameRecord,
    scope: Scope,
    cost: &CostModel,
    iou_threshold: f64,
) -> Result<ApproxConfig> {
    let set = safe_set(grid, frame, scope, iou_threshold)?;
    Ok(fastest(&set.members, cost)?.expect("safe set always holds the baseline"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoveragePoint {
    pub k: usize,
    /// The config added at this rank.
    pub config: ApproxConfig,
    pub coverage: f64,
}

/// Fraction of frames whose optimal config is among the `k` most frequent
/// optimal configs.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCurve {
    pub scope: Scope,
    pub frames: usize,
    pub points: Vec<CoveragePoint>,
}

impl CoverageCurve {
    /// Smallest k whose coverage reaches `fraction`.
    pub fn configs_needed(&self, fraction: f64) -> Option<usize> {
        self.points.iter().find(|p| p.coverage >= fraction).map(|p| p.k)
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["k", "coverage"])?;
        for p in &self.points {
            w.write_record([p.k.to_string(), format!("{:.6}", p.coverage)])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn coverage_curve<'a>(
    grid: &ConfigGrid,
    frames: impl IntoIterator<Item = &'a FrameRecord>,
    scope: Scope,
    cost: &CostModel,
    iou_threshold: f64,
) -> Result<CoverageCurve> {
    let mut counts = vec![0usize; grid.len()];
    let mut n = 0usize;
    for frame in frames {
        let best = optimal_config(grid, frame, scope, cost, iou_threshold)?;
        counts[grid.index_of(best).expect("optimal config is a grid member")] += 1;
        n += 1;
    }
    if n == 0 {
        return Err(DsaError::Empty("coverage curve needs at least one frame"));
    }
    let mut ranked: Vec<usize> = (0..grid.len()).filter(|&i| counts[i] > 0).collect();
    // stable sort keeps enumeration order among equal counts
    ranked.sort_by(|&a, &b| counts[b].cmp(&counts[a]));
    let mut covered = 0usize;
    let points = ranked
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            covered += counts[i];
            CoveragePoint { k: rank + 1, config: grid.configs()[i], coverage: covered as f64 / n as f64 }
        })
        .collect();
    Ok(CoverageCurve { scope, frames: n, points })
}

/// Category mAP of every grid config, for each category of the trace.
#[derive(Debug, Clone)]
pub struct CategoryMapTable {
    grid: ConfigGrid,
    maps: BTreeMap<CategoryId, Vec<f64>>,
}

impl CategoryMapTable {
    pub fn build(trace: &DetectionTrace, iou_threshold: f64) -> Result<Self> {
        trace.require_dense()?;
        let maps = trace
            .categories()
            .into_iter()
            .map(|cat| {
                let row = trace
                    .grid
                    .configs()
                    .iter()
                    .map(|&c| category_map(trace, c, cat, iou_threshold))
                    .collect::<Result<Vec<_>>>()?;
                Ok((cat, row))
            })
            .collect::<Result<_>>()?;
        Ok(Self { grid: trace.grid.clone(), maps })
    }

    pub fn categories(&self) -> impl Iterator<Item = CategoryId> + '_ {
        self.maps.keys().copied()
    }

    pub fn map(&self, category: CategoryId, config: ApproxConfig) -> Option<f64> {
        Some(self.maps.get(&category)?[self.grid.index_of(config)?])
    }

    pub fn baseline_map(&self, category: CategoryId) -> Option<f64> {
        self.map(category, self.grid.baseline())
    }

    /// Configs whose category mAP is at least the baseline's, for the
    /// category or (under [`Scope::Any`]) for every category at once.
    pub fn safe_configs(&self, scope: Scope) -> Result<Vec<ApproxConfig>> {
        let rows: Vec<&Vec<f64>> = match scope {
            Scope::Category(c) => vec![self.maps.get(&c).ok_or(DsaError::NoFrames(c))?],
            Scope::Any => self.maps.values().collect(),
        };
        let base = self.grid.index_of(self.grid.baseline()).expect("baseline is a member");
        Ok(self
            .grid
            .configs()
            .iter()
            .enumerate()
            .filter(|(i, _)| rows.iter().all(|row| row[*i] >= row[base]))
            .map(|(_, c)| *c)
            .collect())
    }

    /// Fastest config that keeps category mAP at or above baseline.
    pub fn best_static_config(&self, scope: Scope, cost: &CostModel) -> Result<ApproxConfig> {
        let safe = self.safe_configs(scope)?;
        Ok(fastest(&safe, cost)?.unwrap_or(self.grid.baseline()))
    }
}

/// Per-frame choice recorded in oracle and simulation outputs.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FrameChoice {
    pub video: String,
    pub frame: u32,
    pub config: ApproxConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleEntry {
    pub category: CategoryId,
    /// Frames charged to this category: all frames of videos it appears in.
    pub frames: usize,
    pub baseline_map: f64,
    pub static_config: ApproxConfig,
    pub static_speedup: f64,
    pub static_map: f64,
    pub dynamic_speedup: f64,
    pub dynamic_map: f64,
    /// Baseline mAP is zero, so "safe" is vacuous.
    pub degenerate: bool,
    pub optimal_configs: Vec<FrameChoice>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub detector: String,
    pub entries: Vec<OracleEntry>,
}

impl OracleReport {
    pub fn has_degenerate(&self) -> bool {
        self.entries.iter().any(|e| e.degenerate)
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record([
            "category",
            "frames",
            "baseline_map",
            "static_height",
            "static_proposals",
            "static_speedup",
            "static_map",
            "dynamic_speedup",
            "dynamic_map",
            "degenerate",
        ])?;
        for e in &self.entries {
            w.write_record([
                e.category.to_string(),
                e.frames.to_string(),
                format!("{:.6}", e.baseline_map),
                e.static_config.image_height.to_string(),
                e.static_config.proposal_count.to_string(),
                format!("{:.6}", e.static_speedup),
                format!("{:.6}", e.static_map),
                format!("{:.6}", e.dynamic_speedup),
                format!("{:.6}", e.dynamic_map),
                e.degenerate.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Per-frame dynamic-oracle choices: `category,video,frame,height,proposals`.
    pub fn write_frames_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["category", "video", "frame", "height", "proposals"])?;
        for e in &self.entries {
            for c in &e.optimal_configs {
                w.write_record([
                    e.category.to_string(),
                    c.video.clone(),
                    c.frame.to_string(),
                    c.config.image_height.to_string(),
                    c.config.proposal_count.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "oracle limit study ({})", self.detector)?;
        writeln!(
            f,
            "{:>8} {:>7} {:>9} {:>12} {:>9} {:>9} {:>9} {:>9}",
            "category", "frames", "base mAP", "static cfg", "static x", "static mAP", "dyn x", "dyn mAP"
        )?;
        for e in &self.entries {
            writeln!(
                f,
                "{:>8} {:>7} {:>9.4} {:>12} {:>9.3} {:>9.4} {:>9.3} {:>9.4}{}",
                e.category.to_string(),
                e.frames,
                e.baseline_map,
                e.static_config.to_string(),
                e.static_speedup,
                e.static_map,
                e.dynamic_speedup,
                e.dynamic_map,
                if e.degenerate { "  (degenerate baseline)" } else { "" }
            )?;
        }
        Ok(())
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Static and dynamic oracle speedups per category on a dense trace.
pub fn limit_study(trace: &DetectionTrace, cost: &CostModel, iou_threshold: f64) -> Result<OracleReport> {
    trace.require_dense()?;
    cost.covers(&trace.grid)?;
    let grid = &trace.grid;
    let table = CategoryMapTable::build(trace, iou_threshold)?;
    let base_time = cost.frame_time(grid.baseline())?;

    let mut entries = Vec::new();
    for category in table.categories() {
        let baseline_map = table.baseline_map(category).expect("category is in the table");
        let static_config = table.best_static_config(Scope::Category(category), cost)?;
        let static_time = cost.frame_time(static_config)?;

        let mut optimal_configs = Vec::new();
        let (mut t_base, mut t_static, mut t_dyn) = (0.0, 0.0, 0.0);
        let mut dyn_aps = Vec::new();
        for frame in trace.category_frames(category) {
            let best = optimal_config(grid, frame, Scope::Category(category), cost, iou_threshold)?;
            t_base += base_time;
            t_static += static_time;
            t_dyn += cost.frame_time(best)?;
            if let Some(ap) = image_ap(frame.detections(best)?, &frame.gts, category, iou_threshold) {
                dyn_aps.push(ap);
            }
            optimal_configs.push(FrameChoice { video: frame.video.clone(), frame: frame.frame, config: best });
        }

        entries.push(OracleEntry {
            category,
            frames: optimal_configs.len(),
            baseline_map,
            static_config,
            static_speedup: t_base / t_static,
            static_map: table.map(category, static_config).expect("grid member"),
            dynamic_speedup: t_base / t_dyn,
            dynamic_map: mean(dyn_aps).ok_or(DsaError::NoFrames(category))?,
            degenerate: baseline_map == 0.0,
            optimal_configs,
        });
    }
    Ok(OracleReport { detector: cost.detector.clone(), entries })
}

/// Per-frame optimal configs over all categories present, video by video.
pub fn dynamic_schedule(
    trace: &DetectionTrace,
    cost: &CostModel,
    iou_threshold: f64,
) -> Result<Vec<Vec<ApproxConfig>>> {
    trace
        .videos
        .iter()
        .map(|v| v.frames.iter().map(|f| optimal_config(&trace.grid, f, Scope::Any, cost, iou_threshold)).collect())
        .collect()
}
