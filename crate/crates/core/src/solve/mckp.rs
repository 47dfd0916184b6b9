use super::{Allocation, MultiTreatmentInstance};
use crate::error::{Error, Result};

/// Upper limit on `L^M` for the exhaustive search.
pub const MCKP_SEARCH_LIMIT: f64 = 1e8;

/// Exact optimum of the multiple-choice knapsack: one level per individual,
/// total cost within `budget`, maximum total reward.
pub fn mckp_oracle(inst: &MultiTreatmentInstance, budget: f64) -> Result<Allocation> {
    let m = inst.len();
    let l = inst.n_levels();
    if (l as f64).powi(m as i32) > MCKP_SEARCH_LIMIT {
        return Err(Error::Capacity(format!(
            "{l}^{m} level combinations exceeds the search limit"
        )));
    }
    let minimum = inst.base_cost();
    if budget < minimum {
        return Err(Error::Infeasible { budget, minimum });
    }
    // Suffix bounds: least cost and greatest reward the remaining rows can take.
    let mut min_rest = vec![0.0; m + 1];
    let mut max_rest = vec![0.0; m + 1];
    for i in (0..m).rev() {
        min_rest[i] = min_rest[i + 1] + inst.cost(i, 0);
        max_rest[i] = max_rest[i + 1] + inst.reward(i, l - 1);
    }
    struct Search<'a> {
        inst: &'a MultiTreatmentInstance,
        min_rest: Vec<f64>,
        max_rest: Vec<f64>,
        current: Vec<usize>,
        best: f64,
        best_choice: Vec<usize>,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize, value: f64, room: f64) {
            if i == self.current.len() {
                if value > self.best {
                    self.best = value;
                    self.best_choice.clone_from(&self.current);
                }
                return;
            }
            if value + self.max_rest[i] <= self.best {
                return;
            }
            for j in (0..self.inst.n_levels()).rev() {
                let c = self.inst.cost(i, j);
                if c + self.min_rest[i + 1] <= room {
                    self.current[i] = j;
                    self.go(i + 1, value + self.inst.reward(i, j), room - c);
                }
            }
        }
    }
    let mut s = Search {
        inst,
        min_rest,
        max_rest,
        current: vec![0; m],
        best: f64::NEG_INFINITY,
        best_choice: vec![0; m],
    };
    s.go(0, 0.0, budget);
    Ok(inst.evaluate(s.best_choice))
}
