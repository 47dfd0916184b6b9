use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::GroundTruth;

/// Denominators below this are clamped when forming marginal utilities.
pub const MARGINAL_DENOM_FLOOR: f64 = 1e-9;

/// Chosen level per individual with the cost and reward it implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub chosen: Vec<usize>,
    pub consumed_cost: f64,
    pub objective: f64,
}

impl Allocation {
    /// Indices assigned a non-zero level.
    pub fn treated(&self) -> Vec<usize> {
        self.chosen
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > 0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Per-individual response matrices `r_ij`, `c_ij`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiTreatmentInstance {
    m: usize,
    levels: usize,
    r: Vec<f64>,
    c: Vec<f64>,
}

impl MultiTreatmentInstance {
    /// Checks finiteness, `c_i0 ≥ 0`, and strictly increasing rows.
    pub fn new(r: Vec<Vec<f64>>, c: Vec<Vec<f64>>) -> Result<Self> {
        if r.len() != c.len() {
            return Err(Error::Domain(format!(
                "reward matrix has {} rows, cost matrix {}",
                r.len(),
                c.len()
            )));
        }
        let levels = r.first().map_or(0, Vec::len);
        if levels < 2 && !r.is_empty() {
            return Err(Error::Domain("instances need at least two levels".into()));
        }
        for (i, (rr, cc)) in r.iter().zip(&c).enumerate() {
            if rr.len() != levels || cc.len() != levels {
                return Err(Error::Domain(format!("row {i} has the wrong number of levels")));
            }
            if rr.iter().chain(cc).any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("row {i} has a non-finite entry")));
            }
            if cc[0] < 0.0 {
                return Err(Error::Domain(format!("row {i} has negative base cost {}", cc[0])));
            }
            for j in 1..levels {
                if !(rr[j] > rr[j - 1]) || !(cc[j] > cc[j - 1]) {
                    return Err(Error::Domain(format!(
                        "row {i} is not strictly increasing at level {j}"
                    )));
                }
            }
        }
        Ok(Self {
            m: r.len(),
            levels,
            r: r.into_iter().flatten().collect(),
            c: c.into_iter().flatten().collect(),
        })
    }

    /// Builds rewards from costs and marginal utilities, with `r_i0 = 0`.
    /// Used when only `ℓ̂` and a cost model are available.
    pub fn from_marginals(costs: Vec<Vec<f64>>, ell: &[Vec<f64>]) -> Result<Self> {
        if costs.len() != ell.len() {
            return Err(Error::Domain("cost and marginal tables differ in length".into()));
        }
        let mut r = Vec::with_capacity(costs.len());
        for (cc, ll) in costs.iter().zip(ell) {
            if ll.len() + 1 != cc.len() {
                return Err(Error::Domain("marginal row length must be levels - 1".into()));
            }
            let mut row = vec![0.0; cc.len()];
            for j in 1..cc.len() {
                row[j] = row[j - 1] + ll[j - 1] * (cc[j] - cc[j - 1]);
            }
            r.push(row);
        }
        Self::new(r, costs)
    }

    pub fn from_ground_truth(gt: &GroundTruth) -> Result<Self> {
        Self::new(gt.response_r.clone(), gt.response_c.clone())
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn n_levels(&self) -> usize {
        self.levels
    }

    pub fn reward(&self, i: usize, j: usize) -> f64 {
        self.r[i * self.levels + j]
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.c[i * self.levels + j]
    }

    pub fn reward_row(&self, i: usize) -> &[f64] {
        &self.r[i * self.levels..(i + 1) * self.levels]
    }

    pub fn cost_row(&self, i: usize) -> &[f64] {
        &self.c[i * self.levels..(i + 1) * self.levels]
    }

    /// Cost of leaving everyone at level 0, the least any allocation spends.
    pub fn base_cost(&self) -> f64 {
        (0..self.m).map(|i| self.cost(i, 0)).sum()
    }

    pub fn top_cost(&self) -> f64 {
        (0..self.m).map(|i| self.cost(i, self.levels - 1)).sum()
    }

    /// Largest single-individual span `r_{i,L-1} − r_i0`.
    pub fn max_reward_span(&self) -> f64 {
        (0..self.m)
            .map(|i| self.reward(i, self.levels - 1) - self.reward(i, 0))
            .fold(0.0, f64::max)
    }

    pub fn consumed(&self, chosen: &[usize]) -> f64 {
        chosen.iter().enumerate().map(|(i, &j)| self.cost(i, j)).sum()
    }

    pub fn objective(&self, chosen: &[usize]) -> f64 {
        chosen.iter().enumerate().map(|(i, &j)| self.reward(i, j)).sum()
    }

    pub fn evaluate(&self, chosen: Vec<usize>) -> Allocation {
        Allocation {
            consumed_cost: self.consumed(&chosen),
            objective: self.objective(&chosen),
            chosen,
        }
    }
}

/// Marginal utilities `ℓ_ij` with a per-row record of whether they are
/// non-increasing in `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalTable {
    pub ell: Vec<Vec<f64>>,
    pub monotone_ok: Vec<bool>,
    /// Denominators raised to [`MARGINAL_DENOM_FLOOR`].
    pub clamped: usize,
}

fn non_increasing(row: &[f64]) -> bool {
    row.windows(2).all(|w| w[1] <= w[0])
}

impl MarginalTable {
    /// Wraps externally predicted utilities, e.g. `2q/γ` from a marginal model.
    pub fn from_rows(ell: Vec<Vec<f64>>) -> Result<Self> {
        let width = ell.first().map_or(0, Vec::len);
        for (i, row) in ell.iter().enumerate() {
            if row.len() != width || row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("marginal row {i} is ragged or non-finite")));
            }
        }
        let monotone_ok = ell.iter().map(|r| non_increasing(r)).collect();
        Ok(Self {
            ell,
            monotone_ok,
            clamped: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.ell.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ell.is_empty()
    }

    pub fn all_monotone(&self) -> bool {
        self.monotone_ok.iter().all(|&b| b)
    }

    pub fn max_value(&self) -> f64 {
        self.ell.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Projects every non-monotone row onto the non-increasing cone (least
    /// squares, pool-adjacent-violators) and returns how many rows changed.
    pub fn isotonic_repair(&self) -> (MarginalTable, usize) {
        let mut repaired = 0;
        let ell = self
            .ell
            .iter()
            .zip(&self.monotone_ok)
            .map(|(row, &ok)| {
                if ok {
                    row.clone()
                } else {
                    repaired += 1;
                    pava_non_increasing(row)
                }
            })
            .collect::<Vec<_>>();
        let monotone_ok = vec![true; ell.len()];
        (
            MarginalTable {
                ell,
                monotone_ok,
                clamped: self.clamped,
            },
            repaired,
        )
    }
}

fn pava_non_increasing(row: &[f64]) -> Vec<f64> {
    // Blocks of (mean, size); merge while a later block exceeds its predecessor.
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(row.len());
    for &v in row {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (m2, n2) = blocks[blocks.len() - 1];
            let (m1, n1) = blocks[blocks.len() - 2];
            if m2 <= m1 {
                break;
            }
            blocks.pop();
            let n = n1 + n2;
            *blocks.last_mut().unwrap() = ((m1 * n1 as f64 + m2 * n2 as f64) / n as f64, n);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, n)| std::iter::repeat_n(m, n))
        .collect()
}

/// `ℓ_ij = (r_{i,j+1} − r_ij)/(c_{i,j+1} − c_ij)` for every row.
pub fn compute_marginals(inst: &MultiTreatmentInstance) -> Result<MarginalTable> {
    let mut clamped = 0;
    let mut ell = Vec::with_capacity(inst.len());
    for i in 0..inst.len() {
        let (r, c) = (inst.reward_row(i), inst.cost_row(i));
        let mut row = Vec::with_capacity(r.len() - 1);
        for j in 0..r.len() - 1 {
            let dc = c[j + 1] - c[j];
            if !(dc > 0.0) {
                return Err(Error::Domain(format!("row {i}: cost does not increase at level {j}")));
            }
            let denom = if dc < MARGINAL_DENOM_FLOOR {
                clamped += 1;
                MARGINAL_DENOM_FLOOR
            } else {
                dc
            };
            row.push((r[j + 1] - r[j]) / denom);
        }
        ell.push(row);
    }
    let mut table = MarginalTable::from_rows(ell)?;
    table.clamped = clamped;
    Ok(table)
}
