use serde::{Deserialize, Serialize};

use super::{LossKind, Model};
use crate::dataset::RctSample;
use crate::error::{Error, Result};
use crate::math::{clamp_score, sigmoid, softmax};

/// Raw scores and decision-factor estimates, row-major `n × heads`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimates {
    pub kind: LossKind,
    pub heads: usize,
    pub scores: Vec<f64>,
    /// DUM: softmax share of each sample. DRP: ROI `σ(s)/γ`.
    /// DPM: marginal utility `2σ(s)/γ`. Direct rank: `tanh(s)`.
    pub values: Vec<f64>,
}

impl Estimates {
    pub fn len(&self) -> usize {
        self.scores.len() / self.heads
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn value(&self, i: usize, head: usize) -> f64 {
        self.values[i * self.heads + head]
    }

    /// Per-sample rows of values.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.heads).map(<[f64]>::to_vec).collect()
    }
}

/// Turns model scores into the decision factor the model was trained for.
/// Every output is a strictly increasing function of the score, so rankings
/// are preserved.
pub fn predict_decision_factor(model: &Model, samples: &[RctSample], kind: LossKind) -> Result<Estimates> {
    if model.kind != kind {
        return Err(Error::Contract(format!(
            "model was trained with {} but {} estimates were requested",
            model.kind.name(),
            kind.name()
        )));
    }
    let scores = model.scorer.score_all(samples)?;
    let gamma = model.gamma;
    let values = match kind {
        LossKind::Dum => softmax(&scores.iter().map(|&s| clamp_score(s)).collect::<Vec<_>>()),
        LossKind::Drp => scores.iter().map(|&s| sigmoid(clamp_score(s)) / gamma).collect(),
        LossKind::Dpm => scores
            .iter()
            .map(|&s| 2.0 * sigmoid(clamp_score(s)) / gamma)
            .collect(),
        LossKind::DirectRank => scores.iter().map(|&s| clamp_score(s).tanh()).collect(),
    };
    Ok(Estimates {
        kind,
        heads: model.scorer.heads(),
        scores,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{Arity, Scorer};

    fn model(kind: LossKind, arity: Arity, score: f64, gamma: f64) -> Model {
        let mut scorer = Scorer::linear(1, arity, 2).unwrap();
        scorer.params_mut()[1] = score;
        Model {
            kind,
            n_levels: 2,
            gamma,
            scorer,
        }
    }

    fn x(v: f64) -> RctSample {
        RctSample {
            features: vec![v],
            treatment: 0,
            reward: 0.0,
            cost: 0.0,
        }
    }

    #[test]
    fn marginal_estimate_doubles_q() {
        let q: f64 = 0.3;
        let s = (q / (1.0 - q)).ln();
        let m = model(LossKind::Dpm, Arity::PerLevel, s, 1.0);
        let est = predict_decision_factor(&m, &[x(0.0)], LossKind::Dpm).unwrap();
        assert!((est.values[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn kind_mismatch_is_contract_error() {
        let m = model(LossKind::Drp, Arity::Single, 0.0, 0.5);
        assert!(matches!(
            predict_decision_factor(&m, &[x(0.0)], LossKind::Dpm),
            Err(Error::Contract(_))
        ));
        let est = predict_decision_factor(&m, &[x(0.0)], LossKind::Drp).unwrap();
        assert!((est.values[0] - 1.0).abs() < 1e-15);
    }
}
