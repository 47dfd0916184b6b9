use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::RctDataset;
use crate::error::{Error, Result};
use crate::solve::{
    algorithm2_mtbap, lagrangian_mtbap, DualSolution, MarginalTable, MultiTreatmentInstance,
};

/// Level assigned to each individual by some policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyTable {
    pub levels: Vec<usize>,
}

impl PolicyTable {
    pub fn constant(n: usize, level: usize) -> Self {
        Self {
            levels: vec![level; n],
        }
    }
}

/// Inverse-propensity estimate of `(reward, cost)` per individual under
/// `policy`: `Σ_{t_i = π_i} y_i / N_{t_i}`.
pub fn eom(ds: &RctDataset, policy: &PolicyTable) -> Result<(f64, f64)> {
    if policy.levels.len() != ds.len() {
        return Err(Error::MetricDomain(format!(
            "policy covers {} individuals, dataset has {}",
            policy.levels.len(),
            ds.len()
        )));
    }
    let counts = ds.counts();
    for &l in &policy.levels {
        if l >= ds.n_levels() {
            return Err(Error::MetricDomain(format!("policy assigns unknown level {l}")));
        }
        if counts[l] == 0 {
            return Err(Error::MetricDomain(format!("policy assigns empty level {l}")));
        }
    }
    let (mut reward, mut cost) = (0.0, 0.0);
    for (s, &l) in ds.samples().iter().zip(&policy.levels) {
        if s.treatment == l {
            reward += s.reward / counts[l] as f64;
            cost += s.cost / counts[l] as f64;
        }
    }
    Ok((reward, cost))
}

/// How a sweep turns predictions into per-budget allocations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "planner")]
pub enum Planner {
    /// Predicted marginal utilities, allocated by comparisons against `α`.
    Marginal { ell: Vec<Vec<f64>> },
    /// Predicted reward matrix, allocated by the Lagrangian argmax.
    Response { reward: Vec<Vec<f64>> },
    /// Uniform random utilities sorted descending per row.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Budget above the all-level-0 planned cost.
    pub budget: f64,
    pub eom_reward: f64,
    pub eom_cost: f64,
    /// Cost the planner believes it spends.
    pub planned_cost: f64,
    pub alpha_star: f64,
    pub iterations: usize,
    pub infeasible: bool,
    pub levels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Rows whose predicted utilities needed isotonic repair.
    pub repaired_rows: usize,
}

/// Allocates under each budget and scores the resulting policy with
/// [`eom`]. `costs` is the cost model used for planning (one row per sample
/// of `ds`, strictly increasing); budgets are measured above its level-0 total.
pub fn budget_sweep(
    ds: &RctDataset,
    costs: &[Vec<f64>],
    planner: &Planner,
    budgets: &[f64],
    epsilon: f64,
) -> Result<SweepResult> {
    if costs.len() != ds.len() {
        return Err(Error::Contract(format!(
            "cost model covers {} rows, dataset has {}",
            costs.len(),
            ds.len()
        )));
    }
    if budgets.iter().any(|b| !(*b >= 0.0)) || budgets.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("budgets must be non-negative and ascending".into()));
    }
    let (inst, table, repaired_rows) = match planner {
        Planner::Marginal { ell } => {
            let (table, repaired) = MarginalTable::from_rows(ell.clone())?.isotonic_repair();
            let inst = MultiTreatmentInstance::from_marginals(costs.to_vec(), &table.ell)?;
            (inst, Some(table), repaired)
        }
        Planner::Response { reward } => (MultiTreatmentInstance::new(reward.clone(), costs.to_vec())?, None, 0),
        Planner::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let width = ds.n_levels() - 1;
            let ell: Vec<Vec<f64>> = (0..ds.len())
                .map(|_| {
                    let mut row: Vec<f64> = (0..width).map(|_| rng.random_range(0.01..1.0)).collect();
                    row.sort_by(|a, b| b.total_cmp(a));
                    row
                })
                .collect();
            let table = MarginalTable::from_rows(ell)?;
            let inst = MultiTreatmentInstance::from_marginals(costs.to_vec(), &table.ell)?;
            (inst, Some(table), 0)
        }
    };
    let base = inst.base_cost();
    let mut points = Vec::with_capacity(budgets.len());
    for &b in budgets {
        let solved: Result<DualSolution> = match &table {
            Some(t) => algorithm2_mtbap(t, &inst, base + b, epsilon),
            None => lagrangian_mtbap(&inst, base + b, epsilon),
        };
        let point = match solved {
            Ok(sol) => {
                let policy = PolicyTable {
                    levels: sol.allocation.chosen,
                };
                let (eom_reward, eom_cost) = eom(ds, &policy)?;
                SweepPoint {
                    budget: b,
                    eom_reward,
                    eom_cost,
                    planned_cost: sol.allocation.consumed_cost - base,
                    alpha_star: sol.alpha_star,
                    iterations: sol.search.iterations,
                    infeasible: false,
                    levels: policy.levels,
                }
            }
            Err(Error::Infeasible { .. }) => SweepPoint {
                budget: b,
                eom_reward: f64::NAN,
                eom_cost: f64::NAN,
                planned_cost: f64::NAN,
                alpha_star: f64::NAN,
                iterations: 0,
                infeasible: true,
                levels: Vec::new(),
            },
            Err(e) => return Err(e),
        };
        points.push(point);
    }
    Ok(SweepResult { points, repaired_rows })
}
