use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{RctDataset, RctSample};
use crate::error::{Error, Result};

/// Row-per-sample, column-per-level table.
pub type Matrix = Vec<Vec<f64>>;

/// Smallest step kept between consecutive repaired levels.
const MONOTONE_STEP: f64 = 1e-6;

/// Two-phase comparator: per-level ridge regressions of reward and cost on
/// `[x, 1]`, whose predicted response matrices are then handed to a solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPhaseModel {
    pub n_levels: usize,
    pub feature_dim: usize,
    /// Per level, `d + 1` coefficients (intercept last).
    pub reward_coef: Vec<Vec<f64>>,
    pub cost_coef: Vec<Vec<f64>>,
}

fn ridge_fit(rows: &[&RctSample], target: impl Fn(&RctSample) -> f64, d: usize, ridge: f64) -> Result<Vec<f64>> {
    let p = d + 1;
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    let mut z = vec![1.0; p];
    for s in rows {
        z[..d].copy_from_slice(&s.features);
        let y = target(s);
        for a in 0..p {
            xty[a] += z[a] * y;
            for b in 0..=a {
                xtx[(a, b)] += z[a] * z[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[(b, a)] = xtx[(a, b)];
        }
        xtx[(a, a)] += ridge * rows.len() as f64;
    }
    let chol = xtx
        .cholesky()
        .ok_or_else(|| Error::InvalidDataset("normal equations are singular; raise the ridge".into()))?;
    Ok(chol.solve(&xty).iter().copied().collect())
}

fn dot(coef: &[f64], x: &[f64]) -> f64 {
    coef[..x.len()].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + coef[x.len()]
}

/// Forces `c_0 ≥ 0` and strictly increasing rows.
fn repair(row: &mut [f64], floor_first: bool) {
    if floor_first {
        row[0] = row[0].max(0.0);
    }
    for j in 1..row.len() {
        row[j] = row[j].max(row[j - 1] + MONOTONE_STEP);
    }
}

impl TwoPhaseModel {
    pub fn fit(ds: &RctDataset, ridge: f64) -> Result<Self> {
        if !(ridge > 0.0) {
            return Err(Error::Config(format!("ridge must be positive, got {ridge}")));
        }
        let d = ds.feature_dim();
        let mut reward_coef = Vec::with_capacity(ds.n_levels());
        let mut cost_coef = Vec::with_capacity(ds.n_levels());
        for j in 0..ds.n_levels() {
            let rows: Vec<&RctSample> = ds.samples().iter().filter(|s| s.treatment == j).collect();
            if rows.is_empty() {
                return Err(Error::InvalidDataset(format!("level {j} has no samples to fit")));
            }
            reward_coef.push(ridge_fit(&rows, |s| s.reward, d, ridge)?);
            cost_coef.push(ridge_fit(&rows, |s| s.cost, d, ridge)?);
        }
        Ok(Self {
            n_levels: ds.n_levels(),
            feature_dim: d,
            reward_coef,
            cost_coef,
        })
    }

    /// Predicted `(r̂_i·, ĉ_i·)` with monotone repair applied so the pair
    /// forms a valid multi-treatment instance row.
    pub fn predict_row(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.feature_dim {
            return Err(Error::Contract(format!(
                "baseline expects {} features, got {}",
                self.feature_dim,
                x.len()
            )));
        }
        let mut r: Vec<f64> = self.reward_coef.iter().map(|c| dot(c, x)).collect();
        let mut c: Vec<f64> = self.cost_coef.iter().map(|c| dot(c, x)).collect();
        repair(&mut r, false);
        repair(&mut c, true);
        Ok((r, c))
    }

    pub fn predict(&self, samples: &[RctSample]) -> Result<(Matrix, Matrix)> {
        let mut rs = Vec::with_capacity(samples.len());
        let mut cs = Vec::with_capacity(samples.len());
        for s in samples {
            let (r, c) = self.predict_row(&s.features)?;
            rs.push(r);
            cs.push(c);
        }
        Ok((rs, cs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_linear_responses() {
        let mut samples = Vec::new();
        for i in 0..40 {
            let x = i as f64 / 10.0;
            let t = i % 2;
            samples.push(RctSample {
                features: vec![x],
                treatment: t,
                reward: 1.0 + x + 2.0 * t as f64,
                cost: 0.5 + t as f64 * (1.0 + x),
            });
        }
        let ds = RctDataset::new(samples, 2, 1).unwrap();
        let m = TwoPhaseModel::fit(&ds, 1e-12).unwrap();
        let (r, c) = m.predict_row(&[2.0]).unwrap();
        assert!((r[0] - 3.0).abs() < 1e-6 && (r[1] - 5.0).abs() < 1e-6);
        assert!((c[0] - 0.5).abs() < 1e-6 && (c[1] - 3.5).abs() < 1e-6);
    }

    #[test]
    fn repair_enforces_strict_order() {
        let mut row = vec![-1.0, -2.0, 5.0];
        repair(&mut row, true);
        assert_eq!(row[0], 0.0);
        assert!(row[1] > row[0] && row[2] == 5.0);
    }
}
