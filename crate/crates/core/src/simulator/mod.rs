//! Stream replay under a policy, time accounting, and policy comparison.

mod cost;
mod report;
mod stream;

pub use cost::{CostModel, DEFAULT_OVERHEAD_MS};
pub use report::{
    compare_policies, compare_report, ComparisonReport, ComparisonRow, RowScope, AUTOFOCUS, DYNAMIC_ORACLE, OBLIVIOUS,
    STATIC, STATIC_ORACLE,
};
pub use stream::{degradation, simulate_stream, CategoryOutcome, Policy, StreamResult};
