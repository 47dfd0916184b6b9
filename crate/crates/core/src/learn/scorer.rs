use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::RctSample;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    /// `s = w·x + b` per head.
    Linear,
    /// One free parameter per (distinct feature vector, head).
    Tabular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arity {
    Single,
    /// One head per level step, `L - 1` in total.
    PerLevel,
}

/// Distinct feature vectors seen at construction, keyed by bit pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct KeyMap {
    vocab: Vec<Vec<f64>>,
    index: HashMap<Vec<u64>, usize>,
}

fn bits(x: &[f64]) -> Vec<u64> {
    // +0.0 and -0.0 are the same key.
    x.iter().map(|v| (v + 0.0).to_bits()).collect()
}

impl KeyMap {
    fn build<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut map = KeyMap {
            vocab: Vec::new(),
            index: HashMap::new(),
        };
        for x in rows {
            let key = bits(x);
            if !map.index.contains_key(&key) {
                map.index.insert(key, map.vocab.len());
                map.vocab.push(x.to_vec());
            }
        }
        map
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn get(&self, x: &[f64]) -> Option<usize> {
        self.index.get(&bits(x)).copied()
    }

    pub fn vocab(&self) -> &[Vec<f64>] {
        &self.vocab
    }
}

impl From<Vec<Vec<f64>>> for KeyMap {
    fn from(vocab: Vec<Vec<f64>>) -> Self {
        KeyMap::build(vocab.iter().map(Vec::as_slice))
    }
}

impl From<KeyMap> for Vec<Vec<f64>> {
    fn from(map: KeyMap) -> Self {
        map.vocab
    }
}

/// Parametric scoring model producing `s(x)` or `s(x, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorer {
    #[serde(rename = "scorer")]
    kind: ScorerKind,
    arity: Arity,
    heads: usize,
    feature_dim: usize,
    params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    keys: Option<KeyMap>,
}

impl Scorer {
    /// Zero-initialised linear scorer.
    pub fn linear(feature_dim: usize, arity: Arity, n_levels: usize) -> Result<Self> {
        let heads = heads_for(arity, n_levels)?;
        Ok(Self {
            kind: ScorerKind::Linear,
            arity,
            heads,
            feature_dim,
            params: vec![0.0; heads * (feature_dim + 1)],
            keys: None,
        })
    }

    /// Zero-initialised tabular scorer over the distinct feature vectors in
    /// `samples`, in order of first appearance.
    pub fn tabular(samples: &[RctSample], arity: Arity, n_levels: usize) -> Result<Self> {
        let heads = heads_for(arity, n_levels)?;
        let keys = KeyMap::build(samples.iter().map(|s| s.features.as_slice()));
        let feature_dim = samples.first().map_or(0, |s| s.features.len());
        Ok(Self {
            kind: ScorerKind::Tabular,
            arity,
            heads,
            feature_dim,
            params: vec![0.0; keys.len() * heads],
            keys: Some(keys),
        })
    }

    pub fn kind(&self) -> ScorerKind {
        self.kind
    }

    pub fn arity(&self) -> Arity {
        self.arity
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn keys(&self) -> Option<&KeyMap> {
        self.keys.as_ref()
    }

    /// Row handle for `x`: the key index for tabular scorers, 0 for linear.
    pub fn encode(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.feature_dim {
            return Err(Error::Contract(format!(
                "scorer expects {} features, got {}",
                self.feature_dim,
                x.len()
            )));
        }
        match &self.keys {
            Some(keys) => keys
                .get(x)
                .ok_or_else(|| Error::Contract("feature vector not in tabular vocabulary".into())),
            None => Ok(0),
        }
    }

    pub(crate) fn score_encoded(&self, x: &[f64], row: usize, head: usize) -> f64 {
        match self.kind {
            ScorerKind::Linear => {
                let w = &self.params[head * (self.feature_dim + 1)..(head + 1) * (self.feature_dim + 1)];
                w[..self.feature_dim]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    + w[self.feature_dim]
            }
            ScorerKind::Tabular => self.params[row * self.heads + head],
        }
    }

    /// Adds `g · ∂s(x, head)/∂θ` into `grad`.
    pub(crate) fn backprop_encoded(&self, x: &[f64], row: usize, head: usize, g: f64, grad: &mut [f64]) {
        match self.kind {
            ScorerKind::Linear => {
                let off = head * (self.feature_dim + 1);
                for (k, v) in x.iter().enumerate() {
                    grad[off + k] += g * v;
                }
                grad[off + self.feature_dim] += g;
            }
            ScorerKind::Tabular => grad[row * self.heads + head] += g,
        }
    }

    pub fn score(&self, x: &[f64], head: usize) -> Result<f64> {
        if head >= self.heads {
            return Err(Error::Contract(format!("head {head} out of range 0..{}", self.heads)));
        }
        let row = self.encode(x)?;
        Ok(self.score_encoded(x, row, head))
    }

    /// Scores for every sample and head, row-major `n × heads`.
    pub fn score_all(&self, samples: &[RctSample]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(samples.len() * self.heads);
        for s in samples {
            let row = self.encode(&s.features)?;
            for h in 0..self.heads {
                out.push(self.score_encoded(&s.features, row, h));
            }
        }
        Ok(out)
    }

    /// Exact `∂s(x, head)/∂θ`: the augmented input for linear scorers, a
    /// one-hot cell for tabular ones.
    pub fn score_gradient(&self, x: &[f64], head: usize) -> Result<Vec<f64>> {
        let row = self.encode(x)?;
        let mut grad = vec![0.0; self.params.len()];
        self.backprop_encoded(x, row, head, 1.0, &mut grad);
        Ok(grad)
    }
}

fn heads_for(arity: Arity, n_levels: usize) -> Result<usize> {
    if n_levels < 2 {
        return Err(Error::Contract("scorer needs at least two levels".into()));
    }
    Ok(match arity {
        Arity::Single => 1,
        Arity::PerLevel => n_levels - 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(x: Vec<f64>) -> RctSample {
        RctSample {
            features: x,
            treatment: 0,
            reward: 0.0,
            cost: 0.0,
        }
    }

    #[test]
    fn linear_gradient_is_augmented_input() {
        let mut s = Scorer::linear(2, Arity::PerLevel, 3).unwrap();
        s.params_mut().copy_from_slice(&[1.0, 2.0, 3.0, -1.0, 0.5, 0.0]);
        assert_eq!(s.score(&[1.0, 1.0], 0).unwrap(), 6.0);
        assert_eq!(s.score(&[2.0, 4.0], 1).unwrap(), 0.0);
        assert_eq!(
            s.score_gradient(&[2.0, 4.0], 1).unwrap(),
            vec![0.0, 0.0, 0.0, 2.0, 4.0, 1.0]
        );
    }

    #[test]
    fn tabular_gradient_is_one_hot() {
        let samples = vec![sample(vec![0.0]), sample(vec![1.0]), sample(vec![-0.0])];
        let s = Scorer::tabular(&samples, Arity::PerLevel, 3).unwrap();
        assert_eq!(s.keys().unwrap().len(), 2);
        assert_eq!(s.score_gradient(&[1.0], 1).unwrap(), vec![0.0, 0.0, 0.0, 1.0]);
        assert!(s.score(&[7.0], 0).is_err());
    }

    #[test]
    fn serde_rebuilds_key_index() {
        let samples = vec![sample(vec![0.5, 1.0]), sample(vec![2.0, 1.0])];
        let s = Scorer::tabular(&samples, Arity::Single, 2).unwrap();
        let back: Scorer = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.encode(&[2.0, 1.0]).unwrap(), 1);
    }
}
