//! Binary allocation: greedy ROI ranking and exact 0/1 knapsack oracles.

use super::Allocation;
use crate::error::{Error, Result};

/// Largest instance the enumeration oracle accepts.
pub const ENUMERATION_LIMIT: usize = 25;
/// Largest capacity (in grid cells) the DP oracle accepts.
pub const GRID_LIMIT: usize = 1_000_000;

fn check_inputs(tau_r: &[f64], tau_c: &[f64], budget: f64) -> Result<()> {
    if tau_r.len() != tau_c.len() {
        return Err(Error::Domain("tau_r and tau_c differ in length".into()));
    }
    if !(budget >= 0.0) {
        return Err(Error::Domain(format!("budget must be non-negative, got {budget}")));
    }
    if let Some(i) = tau_c.iter().position(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(Error::Domain(format!("tau_c[{i}] = {} is not positive", tau_c[i])));
    }
    if tau_r.iter().any(|r| !r.is_finite()) {
        return Err(Error::Domain("tau_r has a non-finite entry".into()));
    }
    Ok(())
}

fn binary_allocation(take: Vec<bool>, tau_r: &[f64], tau_c: &[f64]) -> Allocation {
    let mut objective = 0.0;
    let mut consumed = 0.0;
    for (i, &t) in take.iter().enumerate() {
        if t {
            objective += tau_r[i];
            consumed += tau_c[i];
        }
    }
    Allocation {
        chosen: take.into_iter().map(usize::from).collect(),
        consumed_cost: consumed,
        objective,
    }
}

/// Indices sorted by `scores` descending, ties kept in index order.
pub fn rank_descending(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Treats individuals in descending `τ^r/τ^c` order, skipping anyone who no
/// longer fits in the remaining budget.
pub fn greedy_btap(tau_r: &[f64], tau_c: &[f64], budget: f64) -> Result<Allocation> {
    check_inputs(tau_r, tau_c, budget)?;
    let roi: Vec<f64> = tau_r.iter().zip(tau_c).map(|(r, c)| r / c).collect();
    greedy_by_rank(&roi, tau_c, budget).map(|take| binary_allocation(take, tau_r, tau_c))
}

/// Greedy selection driven by an arbitrary ranking score (e.g. a learned
/// ROI), charging `tau_c`.
pub fn greedy_by_score(scores: &[f64], tau_c: &[f64], budget: f64) -> Result<Vec<bool>> {
    check_inputs(scores, tau_c, budget)?;
    greedy_by_rank(scores, tau_c, budget)
}

fn greedy_by_rank(scores: &[f64], tau_c: &[f64], budget: f64) -> Result<Vec<bool>> {
    let mut take = vec![false; scores.len()];
    let mut remaining = budget;
    for i in rank_descending(scores) {
        if tau_c[i] <= remaining {
            take[i] = true;
            remaining -= tau_c[i];
        }
    }
    Ok(take)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KnapsackMethod {
    /// Depth-first branch and bound over all subsets.
    Enumerate,
    /// Dynamic programme over costs that are integer multiples of `resolution`.
    Grid { resolution: f64 },
}

/// Exact optimum of the 0/1 knapsack, by enumeration for small `n`.
pub fn knapsack_oracle(tau_r: &[f64], tau_c: &[f64], budget: f64) -> Result<Allocation> {
    knapsack_oracle_with(tau_r, tau_c, budget, KnapsackMethod::Enumerate)
}

pub fn knapsack_oracle_with(tau_r: &[f64], tau_c: &[f64], budget: f64, method: KnapsackMethod) -> Result<Allocation> {
    check_inputs(tau_r, tau_c, budget)?;
    let take = match method {
        KnapsackMethod::Enumerate => enumerate(tau_r, tau_c, budget)?,
        KnapsackMethod::Grid { resolution } => grid_dp(tau_r, tau_c, budget, resolution)?,
    };
    Ok(binary_allocation(take, tau_r, tau_c))
}

fn enumerate(tau_r: &[f64], tau_c: &[f64], budget: f64) -> Result<Vec<bool>> {
    let n = tau_r.len();
    if n > ENUMERATION_LIMIT {
        return Err(Error::Capacity(format!(
            "{n} items exceeds the enumeration limit of {ENUMERATION_LIMIT}"
        )));
    }
    // Suffix sums of positive rewards bound what the remaining items can add.
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + tau_r[i].max(0.0);
    }
    struct Search<'a> {
        r: &'a [f64],
        c: &'a [f64],
        suffix: Vec<f64>,
        best: f64,
        best_mask: u32,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize, value: f64, room: f64, mask: u32) {
            if value > self.best {
                self.best = value;
                self.best_mask = mask;
            }
            if i == self.r.len() || value + self.suffix[i] <= self.best {
                return;
            }
            if self.c[i] <= room {
                self.go(i + 1, value + self.r[i], room - self.c[i], mask | (1 << i));
            }
            self.go(i + 1, value, room, mask);
        }
    }
    let mut s = Search {
        r: tau_r,
        c: tau_c,
        suffix,
        best: 0.0,
        best_mask: 0,
    };
    s.go(0, 0.0, budget, 0);
    Ok((0..n).map(|i| s.best_mask & (1 << i) != 0).collect())
}

fn grid_dp(tau_r: &[f64], tau_c: &[f64], budget: f64, resolution: f64) -> Result<Vec<bool>> {
    if !(resolution > 0.0) {
        return Err(Error::Domain(format!("grid resolution must be positive, got {resolution}")));
    }
    let mut weights = Vec::with_capacity(tau_c.len());
    for (i, &c) in tau_c.iter().enumerate() {
        let cells = c / resolution;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::Capacity(format!(
                "cost {c} of item {i} is not a multiple of {resolution}"
            )));
        }
        weights.push(rounded as usize);
    }
    let cap = (budget / resolution + 1e-9).floor();
    if cap > GRID_LIMIT as f64 {
        return Err(Error::Capacity(format!(
            "budget spans {cap} grid cells, limit is {GRID_LIMIT}"
        )));
    }
    let cap = cap as usize;
    let n = tau_r.len();
    if n.saturating_mul(cap + 1) > 100 * GRID_LIMIT {
        return Err(Error::Capacity("DP table would be too large".into()));
    }
    let mut best = vec![0.0f64; cap + 1];
    let mut keep = vec![false; n * (cap + 1)];
    for i in 0..n {
        let w = weights[i];
        if w > cap || tau_r[i] <= 0.0 {
            continue;
        }
        for b in (w..=cap).rev() {
            let cand = best[b - w] + tau_r[i];
            if cand > best[b] {
                best[b] = cand;
                keep[i * (cap + 1) + b] = true;
            }
        }
    }
    let mut take = vec![false; n];
    let mut b = cap;
    for i in (0..n).rev() {
        if keep[i * (cap + 1) + b] {
            take[i] = true;
            b -= weights[i];
        }
    }
    Ok(take)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_budget_is_empty() {
        let a = greedy_btap(&[1.0, 2.0], &[1.0, 1.0], 0.0).unwrap();
        assert_eq!(a.chosen, vec![0, 0]);
        assert_eq!(a.objective, 0.0);
    }

    #[test]
    fn hand_instance() {
        let a = greedy_btap(&[3.0, 2.0, 1.0], &[2.0, 1.0, 1.0], 2.0).unwrap();
        assert_eq!(a.chosen, vec![0, 1, 1]);
        assert_eq!(a.objective, 3.0);
        let o = knapsack_oracle(&[2.0, 1.0], &[1.0, 1.0], 1.0).unwrap();
        assert_eq!(o.objective, 2.0);
        assert_eq!(o.chosen, vec![1, 0]);
    }

    #[test]
    fn single_item_fits() {
        let o = knapsack_oracle(&[5.0], &[2.0], 2.0).unwrap();
        assert_eq!(o.chosen, vec![1]);
        let g = knapsack_oracle_with(&[5.0], &[2.0], 2.0, KnapsackMethod::Grid { resolution: 1.0 }).unwrap();
        assert_eq!(g, o);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(greedy_btap(&[1.0], &[0.0], 1.0), Err(Error::Domain(_))));
        assert!(matches!(
            knapsack_oracle(&[1.0; 26], &[1.0; 26], 1.0),
            Err(Error::Capacity(_))
        ));
        assert!(matches!(
            knapsack_oracle_with(&[1.0], &[0.3], 1.0, KnapsackMethod::Grid { resolution: 0.25 }),
            Err(Error::Capacity(_))
        ));
    }
}
