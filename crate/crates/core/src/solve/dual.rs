//! Multi-treatment allocation by binary search on the budget multiplier.

use serde::{Deserialize, Serialize};

use super::{Allocation, MarginalTable, MultiTreatmentInstance};
use crate::error::{Error, Result};

/// Iteration cap on the multiplier search.
pub const MAX_DUAL_ITERATIONS: usize = 64;
/// The search also stops once `α_hi − α_lo` is this small relative to `α_hi`.
const COLLAPSE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSearchState {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    /// Multiplier of the returned allocation.
    pub alpha: f64,
    pub epsilon: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub allocation: Allocation,
    pub alpha_star: f64,
    pub search: DualSearchState,
}

/// Level maximising `r_ij − α c_ij`, smallest `j` on ties.
pub fn lagrangian_choice(inst: &MultiTreatmentInstance, alpha: f64) -> Vec<usize> {
    (0..inst.len())
        .map(|i| {
            let (r, c) = (inst.reward_row(i), inst.cost_row(i));
            let mut best = 0;
            let mut best_v = r[0] - alpha * c[0];
            for j in 1..r.len() {
                let v = r[j] - alpha * c[j];
                if v > best_v {
                    best = j;
                    best_v = v;
                }
            }
            best
        })
        .collect()
}

/// Comparison-only rule: the level is the number of marginal utilities
/// strictly above `α`. Valid for non-increasing rows.
pub fn algorithm2_choice(table: &MarginalTable, alpha: f64) -> Vec<usize> {
    table
        .ell
        .iter()
        .map(|row| row.iter().take_while(|&&l| l > alpha).count())
        .collect()
}

/// `α·B + Σ_i max_j (r_ij − α c_ij)`, an upper bound on the primal optimum
/// for every `α ≥ 0`.
pub fn dual_objective(inst: &MultiTreatmentInstance, alpha: f64, budget: f64) -> f64 {
    let chosen = lagrangian_choice(inst, alpha);
    alpha * budget
        + chosen
            .iter()
            .enumerate()
            .map(|(i, &j)| inst.reward(i, j) - alpha * inst.cost(i, j))
            .sum::<f64>()
}

fn dual_search(
    inst: &MultiTreatmentInstance,
    budget: f64,
    epsilon: f64,
    alpha_max: f64,
    decide: impl Fn(f64) -> Vec<usize>,
) -> Result<DualSolution> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if !budget.is_finite() {
        return Err(Error::Domain(format!("budget must be finite, got {budget}")));
    }
    let minimum = inst.base_cost();
    if budget < minimum {
        return Err(Error::Infeasible { budget, minimum });
    }
    let mut state = DualSearchState {
        alpha_lo: 0.0,
        alpha_hi: alpha_max.max(0.0),
        alpha: 0.0,
        epsilon,
        iterations: 0,
    };
    let unconstrained = inst.evaluate(decide(0.0));
    if unconstrained.consumed_cost <= budget {
        state.alpha_hi = 0.0;
        return Ok(DualSolution {
            allocation: unconstrained,
            alpha_star: 0.0,
            search: state,
        });
    }
    // At α = max ℓ nobody is upgraded, which the budget check above admits.
    let mut best = inst.evaluate(vec![0; inst.len()]);
    state.alpha = state.alpha_hi;
    while state.iterations < MAX_DUAL_ITERATIONS {
        if state.alpha_hi - state.alpha_lo <= COLLAPSE_TOL * state.alpha_hi {
            break;
        }
        state.iterations += 1;
        let alpha = 0.5 * (state.alpha_lo + state.alpha_hi);
        let candidate = inst.evaluate(decide(alpha));
        if candidate.consumed_cost <= budget {
            state.alpha_hi = alpha;
            if candidate.consumed_cost > best.consumed_cost {
                best = candidate;
                state.alpha = alpha;
            }
            if budget - best.consumed_cost <= epsilon {
                break;
            }
        } else {
            state.alpha_lo = alpha;
        }
    }
    Ok(DualSolution {
        allocation: best,
        alpha_star: state.alpha,
        search: state,
    })
}

/// Binary search on `α ∈ [0, max ℓ]` using the argmax rule on `r − α c`.
pub fn lagrangian_mtbap(inst: &MultiTreatmentInstance, budget: f64, epsilon: f64) -> Result<DualSolution> {
    let alpha_max = super::compute_marginals(inst)?.max_value();
    dual_search(inst, budget, epsilon, alpha_max, |a| lagrangian_choice(inst, a))
}

/// The same search driven only by comparisons of `ℓ` against `α`; `inst`
/// supplies the costs (and the reported objective).
pub fn algorithm2_mtbap(
    marginals: &MarginalTable,
    inst: &MultiTreatmentInstance,
    budget: f64,
    epsilon: f64,
) -> Result<DualSolution> {
    if marginals.len() != inst.len() || marginals.ell.iter().any(|r| r.len() + 1 != inst.n_levels()) {
        return Err(Error::Domain("marginal table does not match the instance shape".into()));
    }
    if let Some(i) = marginals.monotone_ok.iter().position(|&ok| !ok) {
        return Err(Error::Domain(format!(
            "marginal row {i} is not non-increasing; repair it first"
        )));
    }
    dual_search(inst, budget, epsilon, marginals.max_value(), |a| {
        algorithm2_choice(marginals, a)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> MultiTreatmentInstance {
        MultiTreatmentInstance::new(
            vec![vec![0.0, 2.0], vec![0.0, 1.0]],
            vec![vec![0.0, 1.0], vec![0.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn large_alpha_keeps_everyone_at_base() {
        let inst = two_by_two();
        assert_eq!(lagrangian_choice(&inst, 5.0), vec![0, 0]);
    }

    #[test]
    fn hand_instance_upgrades_best_individual() {
        let inst = two_by_two();
        let lag = lagrangian_mtbap(&inst, 1.0, 1e-6).unwrap();
        assert_eq!(lag.allocation.chosen, vec![1, 0]);
        assert_eq!(lag.allocation.objective, 2.0);
        let table = super::super::compute_marginals(&inst).unwrap();
        let alg2 = algorithm2_mtbap(&table, &inst, 1.0, 1e-6).unwrap();
        assert_eq!(alg2, lag);
    }

    #[test]
    fn generous_budget_takes_top_level() {
        let inst = two_by_two();
        let sol = lagrangian_mtbap(&inst, 2.0, 1e-6).unwrap();
        assert_eq!(sol.allocation.chosen, vec![1, 1]);
        assert_eq!(sol.alpha_star, 0.0);
        let table = super::super::compute_marginals(&inst).unwrap();
        assert_eq!(algorithm2_choice(&table, 0.0), vec![1, 1]);
    }

    #[test]
    fn budget_below_base_is_infeasible() {
        let inst = MultiTreatmentInstance::new(vec![vec![0.0, 1.0]], vec![vec![1.0, 2.0]]).unwrap();
        assert!(matches!(
            lagrangian_mtbap(&inst, 0.5, 1e-6),
            Err(Error::Infeasible { minimum, .. }) if minimum == 1.0
        ));
    }

    #[test]
    fn non_monotone_table_is_rejected() {
        let inst = MultiTreatmentInstance::new(vec![vec![0.0, 1.0, 3.0]], vec![vec![0.0, 1.0, 2.0]]).unwrap();
        let table = super::super::compute_marginals(&inst).unwrap();
        assert!(!table.monotone_ok[0]);
        assert!(matches!(algorithm2_mtbap(&table, &inst, 1.0, 1e-6), Err(Error::Domain(_))));
    }
}
