//! Plan construction: statistics, AND-OR trees, greedy local plans and the
//! shared global plan.

mod andor;
mod global;
mod stats;

pub use andor::{
    build_and_or_tree, select_best_plan, AndNode, AndOrTree, LocalNode, LocalPlan, Mask, OrNode,
    EXHAUSTIVE_LIMIT,
};
pub use global::{
    coverage, coverage_over, GlobalPlan, Join, MergeOutcome, PlanNode, PlanRoot, RootLabel,
};
pub use stats::{
    compute_statistics, estimate_cardinality, vars_of, CsId, StatsCatalog, StatsSummary,
};
