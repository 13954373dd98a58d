use std::fmt;
use std::io::Write;

use super::cost::CostModel;
use super::stream::{simulate_stream, Policy, StreamResult};
use crate::error::{DsaError, Result};
use crate::lattice::ConfigGrid;
use crate::metrics::CategoryId;
use crate::oracle::dynamic_schedule;
use crate::policy::{fit_static, fit_static_per_category, train_autofocus, AutoFocusParams};
use crate::trace::DetectionTrace;
use crate::Scope;

pub const OBLIVIOUS: &str = "category-oblivious";
pub const STATIC: &str = "static";
pub const AUTOFOCUS: &str = "autofocus";
pub const STATIC_ORACLE: &str = "static-oracle";
pub const DYNAMIC_ORACLE: &str = "dynamic-oracle";

/// Row label: one category, or the mean over categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RowScope {
    Category(CategoryId),
    All,
}

impl fmt::Display for RowScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowScope::Category(c) => write!(f, "{c}"),
            RowScope::All => f.write_str("all"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub scope: RowScope,
    pub policy: String,
    pub speedup: f64,
    pub map: Option<f64>,
    pub degradation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub detector: String,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn row(&self, scope: RowScope, policy: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.scope == scope && r.policy == policy)
    }

    /// `category,policy,speedup,map,degradation`; undefined values are `NA`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["category", "policy", "speedup", "map", "degradation"])?;
        for r in &self.rows {
            w.write_record([
                r.scope.to_string(),
                r.policy.clone(),
                format!("{:.6}", r.speedup),
                fmt(r.map),
                fmt(r.degradation),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{:.2}%", v * 100.0));
        writeln!(f, "policy comparison ({})", self.detector)?;
        writeln!(f, "{:>8}  {:<20} {:>8} {:>8} {:>12}", "category", "policy", "speedup", "mAP", "degradation")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>8}  {:<20} {:>7.3}x {:>8} {:>12}",
                r.scope.to_string(),
                r.policy,
                r.speedup,
                r.map.map_or_else(|| "n/a".to_string(), |m| format!("{m:.4}")),
                pct(r.degradation)
            )?;
        }
        Ok(())
    }
}

/// Tabulates results that were simulated on the same trace and cost model.
/// Rows are ordered by category (the overall mean last), then policy name.
pub fn compare_report(results: &[StreamResult]) -> Result<ComparisonReport> {
    let first = results.first().ok_or(DsaError::Empty("no results to compare"))?;
    for r in results {
        if r.inputs_digest != first.inputs_digest {
            return Err(DsaError::Mismatch(format!(
                "results '{}' and '{}' come from different traces or cost models",
                first.policy, r.policy
            )));
        }
        let grid = ConfigGrid::from_spec(&r.grid)?;
        if let Some(c) = r.choices.iter().find(|c| !grid.contains(c.config)) {
            return Err(DsaError::OffGrid(c.config));
        }
    }
    let mut names: Vec<&str> = results.iter().map(|r| r.policy.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(DsaError::Mismatch(format!("policy name '{}' appears twice", w[0])));
    }

    let mut rows = Vec::new();
    for r in results {
        for c in &r.categories {
            rows.push(ComparisonRow {
                scope: RowScope::Category(c.category),
                policy: r.policy.clone(),
                speedup: c.speedup,
                map: Some(c.map),
                degradation: c.degradation,
            });
        }
        rows.push(ComparisonRow {
            scope: RowScope::All,
            policy: r.policy.clone(),
            speedup: r.speedup,
            map: r.map,
            degradation: r.degradation,
        });
    }
    rows.sort_by(|a, b| a.scope.cmp(&b.scope).then_with(|| a.policy.cmp(&b.policy)));
    Ok(ComparisonReport { detector: first.detector.clone(), rows })
}

/// Trains on `train`, then replays `test` under the five compared policies:
/// one config for every category, one per category, AutoFocus, and the two
/// oracles fitted on `test` itself. Results come back in name order.
pub fn compare_policies(
    train: &DetectionTrace,
    test: &DetectionTrace,
    cost: &CostModel,
    params: &AutoFocusParams,
) -> Result<Vec<StreamResult>> {
    if train.grid != test.grid {
        return Err(DsaError::Mismatch("train and test traces use different grids".into()));
    }
    let iou = params.iou_threshold;
    let policies = [
        (OBLIVIOUS, Policy::Static(fit_static(train, cost, Scope::Any, iou)?)),
        (STATIC, Policy::Static(fit_static_per_category(train, cost, iou)?)),
        (AUTOFOCUS, Policy::AutoFocus(train_autofocus(train, cost, params)?)),
        (STATIC_ORACLE, Policy::Static(fit_static_per_category(test, cost, iou)?)),
        (DYNAMIC_ORACLE, Policy::Schedule(dynamic_schedule(test, cost, iou)?)),
    ];
    let mut results = std::thread::scope(|s| {
        let handles: Vec<_> = policies
            .iter()
            .map(|(name, policy)| s.spawn(move || simulate_stream(test, policy, cost, iou).map(|r| r.named(*name))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect::<Result<Vec<_>>>()
    })?;
    results.sort_by(|a, b| a.policy.cmp(&b.policy));
    Ok(results)
}
