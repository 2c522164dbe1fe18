//! Sensing/communication resource allocation across heterogeneous source classes.
//!
//! Each class is a group of Gaussian sources with a shared variance and
//! per-source sensing cost. A fraction of every class is sampled; the samples
//! are compressed (separate problem) or sent over an analog link (joint
//! problem). The goal is the least total mean-squared error under the budgets.

pub mod baselines;
pub mod error;
pub mod joint;
pub mod kkt;
pub mod model;
pub mod oracle;
pub mod separate;
pub mod solver;

pub use baselines::{solve_esf, solve_lcf};
pub use error::{Error, Result};
pub use joint::{
    budget_thresholds, capacity_waterfill, check_ordered_joint, full_sampling_budget,
    joint_thresholds, kkt_certificate_joint, solve_large_budget, solve_zero_cost, structure_check,
    waterfill_powers, FullSamplingBudget, JointThresholds, PowerAllocation, StructureViolation,
};
pub use kkt::{Condition, KktCertificate, Violation, CERTIFY_TOL};
pub use model::*;
pub use oracle::{
    grid_search_joint, grid_search_separate, midpoint_convexity_probe, round_rates_to_grid,
    GridOptimum, GridSpec, ProbeTarget,
};
pub use separate::{
    check_ordered_separate, kkt_certificate_separate, reverse_waterfill_rates, solve_ordered,
    thresholds, RateAllocation, SeparateThresholds,
};
pub use solver::{
    project_box_halfspace, solve_joint_general, solve_separate_general, SolverConfig,
};
