//! The approximation configuration space.
//!
//! A configuration pairs an input image height with a region-proposal count.
//! The canonical lattice has 11 heights (480 down to 80 in steps of 40) and
//! 5 proposal counts (300, 200, 100, 50, 10); its top element (480, 300) is
//! the unapproximated baseline.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{DsaError, Result};

pub const DEFAULT_HEIGHTS: [u32; 11] = [480, 440, 400, 360, 320, 280, 240, 200, 160, 120, 80];
pub const DEFAULT_PROPOSALS: [u32; 5] = [300, 200, 100, 50, 10];

/// One approximation level: (image height in pixels, region proposals).
///
/// Serializes as the two-element array `[height, proposals]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ApproxConfig {
    pub image_height: u32,
    pub proposal_count: u32,
}

impl ApproxConfig {
    pub const fn new(image_height: u32, proposal_count: u32) -> Self {
        Self { image_height, proposal_count }
    }

    /// Lattice partial order: `self` is at most as expensive as `other` on
    /// both axes.
    pub fn dominated_by(&self, other: &ApproxConfig) -> bool {
        self.image_height <= other.image_height && self.proposal_count <= other.proposal_count
    }

    /// Least upper bound of two configs (componentwise max).
    pub fn join(&self, other: &ApproxConfig) -> ApproxConfig {
        ApproxConfig::new(self.image_height.max(other.image_height), self.proposal_count.max(other.proposal_count))
    }
}

impl fmt::Display for ApproxConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.image_height, self.proposal_count)
    }
}

impl Serialize for ApproxConfig {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        [self.image_height, self.proposal_count].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ApproxConfig {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let [h, p] = <[u32; 2]>::deserialize(deserializer)?;
        Ok(ApproxConfig::new(h, p))
    }
}

/// The level lists as they appear in trace headers and scenario files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub heights: Vec<u32>,
    pub proposals: Vec<u32>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { heights: DEFAULT_HEIGHTS.to_vec(), proposals: DEFAULT_PROPOSALS.to_vec() }
    }
}

/// The full configuration lattice, enumerated descending-height major,
/// descending-proposals minor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigGrid {
    heights: Vec<u32>,
    proposals: Vec<u32>,
    configs: Vec<ApproxConfig>,
}

impl ConfigGrid {
    /// Builds a grid from arbitrary level lists. Levels are sorted
    /// descending; duplicates and zero levels are rejected.
    pub fn new(heights: &[u32], proposals: &[u32]) -> Result<Self> {
        let heights = Self::normalize_levels(heights, "heights")?;
        let proposals = Self::normalize_levels(proposals, "proposals")?;
        let configs = heights.iter().flat_map(|&h| proposals.iter().map(move |&p| ApproxConfig::new(h, p))).collect();
        Ok(Self { heights, proposals, configs })
    }

    fn normalize_levels(levels: &[u32], axis: &str) -> Result<Vec<u32>> {
        if levels.is_empty() {
            return Err(DsaError::InvalidGrid(format!("{axis} list is empty")));
        }
        let mut sorted = levels.to_vec();
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(DsaError::InvalidGrid(format!("{axis} list has duplicates")));
        }
        if sorted.last() == Some(&0) {
            return Err(DsaError::InvalidGrid(format!("{axis} must be positive")));
        }
        Ok(sorted)
    }

    pub fn from_spec(spec: &GridSpec) -> Result<Self> {
        Self::new(&spec.heights, &spec.proposals)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec { heights: self.heights.clone(), proposals: self.proposals.clone() }
    }

    pub fn configs(&self) -> &[ApproxConfig] {
        &self.configs
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    /// Heights, descending.
    pub fn heights(&self) -> &[u32] {
        &self.heights
    }

    /// Proposal counts, descending.
    pub fn proposals(&self) -> &[u32] {
        &self.proposals
    }

    /// The top of the lattice: largest height with the most proposals.
    pub fn baseline(&self) -> ApproxConfig {
        ApproxConfig::new(self.heights[0], self.proposals[0])
    }

    /// Position of `config` in enumeration order.
    pub fn index_of(&self, config: ApproxConfig) -> Option<usize> {
        let hi = self.heights.iter().position(|&h| h == config.image_height)?;
        let pi = self.proposals.iter().position(|&p| p == config.proposal_count)?;
        Some(hi * self.proposals.len() + pi)
    }

    pub fn contains(&self, config: ApproxConfig) -> bool {
        self.index_of(config).is_some()
    }

    pub fn check(&self, config: ApproxConfig) -> Result<()> {
        if self.contains(config) {
            Ok(())
        } else {
            Err(DsaError::OffGrid(config))
        }
    }

    /// Rounds a continuous estimate onto the lattice, each axis
    /// independently. Values outside the level range clamp to the boundary;
    /// exact midpoints resolve to the larger level.
    pub fn nearest_config(&self, height_estimate: f64, proposals_estimate: f64) -> Result<ApproxConfig> {
        if !height_estimate.is_finite() {
            return Err(DsaError::NonFinite { axis: "image height", value: height_estimate });
        }
        if !proposals_estimate.is_finite() {
            return Err(DsaError::NonFinite { axis: "proposal count", value: proposals_estimate });
        }
        Ok(ApproxConfig::new(
            nearest_level(&self.heights, height_estimate),
            nearest_level(&self.proposals, proposals_estimate),
        ))
    }
}

impl Default for ConfigGrid {
    fn default() -> Self {
        enumerate_grid()
    }
}

/// The canonical 11 × 5 grid with baseline (480, 300).
pub fn enumerate_grid() -> ConfigGrid {
    ConfigGrid::new(&DEFAULT_HEIGHTS, &DEFAULT_PROPOSALS).expect("default levels are valid")
}

// `levels` is sorted descending, so scanning in order and replacing only on a
// strictly smaller distance keeps the larger level on ties.
fn nearest_level(levels: &[u32], estimate: f64) -> u32 {
    let mut best = levels[0];
    let mut best_dist = (f64::from(best) - estimate).abs();
    for &level in &levels[1..] {
        let dist = (f64::from(level) - estimate).abs();
        if dist < best_dist {
            best = level;
            best_dist = dist;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn canonical_grid_shape() {
        let grid = enumerate_grid();
        assert_eq!(grid.len(), 55);
        assert_eq!(grid.configs()[0], ApproxConfig::new(480, 300));
        assert_eq!(grid.configs()[54], ApproxConfig::new(80, 10));
        assert_eq!(grid.baseline(), ApproxConfig::new(480, 300));
        assert_eq!(grid.configs()[1], ApproxConfig::new(480, 200));
        assert_eq!(grid.configs()[5], ApproxConfig::new(440, 300));
    }

    #[test]
    fn enumeration_is_pure() {
        assert_eq!(enumerate_grid(), enumerate_grid());
    }

    #[test]
    fn configs_are_distinct_and_indexed() {
        let grid = enumerate_grid();
        for (i, c) in grid.configs().iter().enumerate() {
            assert_eq!(grid.index_of(*c), Some(i));
        }
        assert_eq!(grid.index_of(ApproxConfig::new(81, 300)), None);
    }

    #[test]
    fn nearest_examples() {
        let grid = enumerate_grid();
        assert_eq!(grid.nearest_config(470.0, 290.0).unwrap(), ApproxConfig::new(480, 300));
        assert_eq!(grid.nearest_config(9999.0, -5.0).unwrap(), ApproxConfig::new(480, 10));
        // 100 sits between 80 and 120, 150 between 100 and 200.
        assert_eq!(grid.nearest_config(100.0, 150.0).unwrap(), ApproxConfig::new(120, 200));
    }

    #[test]
    fn nearest_rejects_non_finite() {
        let grid = enumerate_grid();
        assert!(matches!(grid.nearest_config(f64::NAN, 10.0), Err(DsaError::NonFinite { .. })));
        assert!(matches!(grid.nearest_config(100.0, f64::INFINITY), Err(DsaError::NonFinite { .. })));
    }

    #[test]
    fn custom_levels_are_sorted() {
        let grid = ConfigGrid::new(&[80, 480, 240], &[10, 300]).unwrap();
        assert_eq!(grid.heights(), &[480, 240, 80]);
        assert_eq!(grid.baseline(), ApproxConfig::new(480, 300));
        assert!(ConfigGrid::new(&[80, 80], &[10]).is_err());
        assert!(ConfigGrid::new(&[], &[10]).is_err());
    }

    #[test]
    fn config_serializes_as_pair() {
        let c = ApproxConfig::new(160, 50);
        assert_eq!(serde_json::to_string(&c).unwrap(), "[160,50]");
        let back: ApproxConfig = serde_json::from_str("[160,50]").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn members_round_to_themselves() {
        let grid = enumerate_grid();
        for c in grid.configs() {
            let r = grid.nearest_config(f64::from(c.image_height), f64::from(c.proposal_count)).unwrap();
            assert_eq!(r, *c);
        }
    }

    proptest! {
        #[test]
        fn nearest_is_always_a_member(h in -1e4f64..1e4, p in -1e4f64..1e4) {
            let grid = enumerate_grid();
            let c = grid.nearest_config(h, p).unwrap();
            prop_assert!(grid.contains(c));
            // no other level is strictly closer on either axis
            for &lvl in grid.heights() {
                prop_assert!((f64::from(c.image_height) - h).abs() <= (f64::from(lvl) - h).abs());
            }
            for &lvl in grid.proposals() {
                prop_assert!((f64::from(c.proposal_count) - p).abs() <= (f64::from(lvl) - p).abs());
            }
        }
    }
}
