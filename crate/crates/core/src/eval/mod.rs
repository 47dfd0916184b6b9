//! Offline evaluation: cost and uplift curves with their area ratios, the
//! inverse-propensity policy value, and budget sweeps.

mod curve;
mod policy;

pub use curve::{
    aucc, auuc, binary_quintuples, build_quintuples, mt_aucc, mt_cost_curve, uplift_curve, CostCurve, Group,
    Quintuple, EXACT_CURVE_LIMIT,
};
pub use policy::{budget_sweep, eom, Planner, PolicyTable, SweepPoint, SweepResult};
