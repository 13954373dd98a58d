use std::collections::{BTreeMap, BTreeSet};

use serde::de::{self, MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{DsaError, Result};
use crate::lattice::{ApproxConfig, ConfigGrid};
use crate::metrics::CategoryId;
use crate::oracle::CategoryMapTable;
use crate::simulator::CostModel;
use crate::trace::DetectionTrace;
use crate::Scope;

/// One fixed config per category, or a single `any` config for every
/// category. Serializes as a JSON object `{"any": [h, p], "3": [h, p]}`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StaticPolicy {
    pub entries: BTreeMap<Scope, ApproxConfig>,
}

impl StaticPolicy {
    pub fn oblivious(config: ApproxConfig) -> Self {
        Self { entries: BTreeMap::from([(Scope::Any, config)]) }
    }

    pub fn get(&self, scope: Scope) -> Option<ApproxConfig> {
        self.entries.get(&scope).copied()
    }

    /// Config to run when the categories in view are known. Several
    /// categories take the join of their configs; unmapped categories fall
    /// back to the `any` entry, then to the baseline.
    pub fn config_for(&self, categories: &BTreeSet<CategoryId>, grid: &ConfigGrid) -> ApproxConfig {
        let fallback = self.get(Scope::Any).unwrap_or(grid.baseline());
        categories
            .iter()
            .map(|&c| self.get(Scope::Category(c)).unwrap_or(fallback))
            .reduce(|a, b| a.join(&b))
            .unwrap_or(fallback)
    }

    pub fn validate(&self, grid: &ConfigGrid) -> Result<()> {
        self.entries.values().try_for_each(|c| grid.check(*c))
    }
}

impl Serialize for StaticPolicy {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for (scope, config) in &self.entries {
            map.serialize_entry(&scope.to_string(), config)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for StaticPolicy {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct PolicyVisitor;
        impl<'de> Visitor<'de> for PolicyVisitor {
            type Value = StaticPolicy;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a map from category id or \"any\" to [height, proposals]")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> std::result::Result<StaticPolicy, A::Error> {
                let mut entries = BTreeMap::new();
                while let Some((key, config)) = access.next_entry::<String, ApproxConfig>()? {
                    let scope: Scope = key.parse().map_err(de::Error::custom)?;
                    if entries.insert(scope, config).is_some() {
                        return Err(de::Error::custom(format!("duplicate key {key}")));
                    }
                }
                Ok(StaticPolicy { entries })
            }
        }
        deserializer.deserialize_map(PolicyVisitor)
    }
}

/// Fastest config whose training-set mAP stays at or above the baseline's,
/// for one category or, with [`Scope::Any`], for all categories jointly.
/// Falls back to the baseline when nothing else qualifies.
pub fn fit_static(trace: &DetectionTrace, cost: &CostModel, scope: Scope, iou_threshold: f64) -> Result<StaticPolicy> {
    if trace.is_empty() {
        return Err(DsaError::Empty("training trace has no frames"));
    }
    cost.covers(&trace.grid)?;
    let table = CategoryMapTable::build(trace, iou_threshold)?;
    let config = table.best_static_config(scope, cost)?;
    Ok(StaticPolicy { entries: BTreeMap::from([(scope, config)]) })
}

/// One entry per category present in the trace.
pub fn fit_static_per_category(trace: &DetectionTrace, cost: &CostModel, iou_threshold: f64) -> Result<StaticPolicy> {
    if trace.is_empty() {
        return Err(DsaError::Empty("training trace has no frames"));
    }
    cost.covers(&trace.grid)?;
    let table = CategoryMapTable::build(trace, iou_threshold)?;
    let entries = table
        .categories()
        .map(|c| Ok((Scope::Category(c), table.best_static_config(Scope::Category(c), cost)?)))
        .collect::<Result<_>>()?;
    Ok(StaticPolicy { entries })
}
