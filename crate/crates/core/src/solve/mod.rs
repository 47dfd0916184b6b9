//! Budget allocation solvers and exact oracles for small instances.

mod dual;
mod instance;
mod knapsack;
mod mckp;

pub use dual::{
    algorithm2_choice, algorithm2_mtbap, dual_objective, lagrangian_choice, lagrangian_mtbap, DualSearchState,
    DualSolution, MAX_DUAL_ITERATIONS,
};
pub use instance::{compute_marginals, Allocation, MarginalTable, MultiTreatmentInstance, MARGINAL_DENOM_FLOOR};
pub use knapsack::{
    greedy_btap, greedy_by_score, knapsack_oracle, knapsack_oracle_with, rank_descending, KnapsackMethod,
    ENUMERATION_LIMIT, GRID_LIMIT,
};
pub use mckp::{mckp_oracle, MCKP_SEARCH_LIMIT};
