//! Experiment configuration, read from JSON with keys matching the field
//! names below.

use std::path::{Path, PathBuf};

use decision_factor::learn::{Arity, LossKind, ScorerKind, TrainConfig};
use decision_factor::synth::SynthConfig;
use decision_factor::SchemaConfig;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Stage};

/// Where the trial data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum DatasetSource {
    /// Generated on the fly; `seed` inside is replaced by a stage seed
    /// derived from the experiment seed.
    Synth(SynthConfig),
    Csv { path: PathBuf, schema: SchemaConfig },
}

/// How learned decision factors become allocations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    /// Binary treatment only: fill the budget in descending score order.
    Greedy,
    /// Compare predicted marginal utilities against the dual multiplier.
    Algorithm2,
    /// Two-phase baseline: fit per-level responses, then solve the
    /// Lagrangian on predicted rewards and costs.
    Lagrangian,
}

impl SolverChoice {
    pub fn name(self) -> &'static str {
        match self {
            SolverChoice::Greedy => "greedy",
            SolverChoice::Algorithm2 => "algorithm2",
            SolverChoice::Lagrangian => "lagrangian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Uplift curve area ratio; binary data.
    Auuc,
    /// Cost curve area ratio on the binary orientation.
    Aucc,
    /// Multi-treatment cost curve area ratio.
    MtAucc,
    /// Policy value at every budget; its curve is `(budget, reward)`.
    Eom,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Auuc => "auuc",
            MetricKind::Aucc => "aucc",
            MetricKind::MtAucc => "mt_aucc",
            MetricKind::Eom => "eom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub loss: LossKind,
    #[serde(default = "default_scorer")]
    pub scorer: ScorerKind,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_solver")]
    pub solver: SolverChoice,
    /// Budgets above the all-level-0 planned cost, ascending.
    #[serde(default)]
    pub budgets: Vec<f64>,
    #[serde(default)]
    pub metrics: Vec<MetricKind>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Share of the data held out for allocation and evaluation.
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Budget slack at which the dual search stops early.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Ridge penalty of the per-level response fit that supplies planned
    /// costs (and rewards for the Lagrangian solver).
    #[serde(default = "default_ridge")]
    pub ridge: f64,
}

fn default_scorer() -> ScorerKind {
    ScorerKind::Linear
}

fn default_solver() -> SolverChoice {
    SolverChoice::Algorithm2
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_test_fraction() -> f64 {
    0.3
}

fn default_epsilon() -> f64 {
    1e-6
}

fn default_ridge() -> f64 {
    1e-6
}

impl ExperimentConfig {
    /// Defaults for everything except the data source and loss.
    pub fn new(dataset: DatasetSource, loss: LossKind) -> Self {
        Self {
            dataset,
            loss,
            scorer: default_scorer(),
            train: TrainConfig::default(),
            solver: default_solver(),
            budgets: Vec::new(),
            metrics: Vec::new(),
            out_dir: default_out_dir(),
            seed: 0,
            test_fraction: default_test_fraction(),
            epsilon: default_epsilon(),
            ridge: default_ridge(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(Stage::Config, path, e))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::new(Stage::Config, e.into()))
    }

    /// Number of treatment levels as declared by the source, when known
    /// before reading any data.
    pub fn declared_levels(&self) -> Option<usize> {
        match &self.dataset {
            DatasetSource::Synth(s) => Some(s.n_levels),
            DatasetSource::Csv { .. } => None,
        }
    }

    /// Checks everything that can be checked without touching data. Level
    /// counts of CSV sources are checked again once the file is read.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let fail = |msg: String| Err(PipelineError::config(msg));
        if let DatasetSource::Csv { path, .. } = &self.dataset {
            if !path.is_file() {
                return fail(format!("dataset file {} does not exist", path.display()));
            }
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return fail(format!("test_fraction must lie in [0, 1), got {}", self.test_fraction));
        }
        if !(self.epsilon > 0.0) {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.ridge >= 0.0) {
            return fail(format!("ridge must be non-negative, got {}", self.ridge));
        }
        if self.budgets.iter().any(|b| !(*b >= 0.0 && b.is_finite())) || self.budgets.windows(2).any(|w| w[1] < w[0]) {
            return fail("budgets must be finite, non-negative and ascending".into());
        }
        if self.loss == LossKind::DirectRank && self.solver == SolverChoice::Algorithm2 {
            return fail("direct_rank outputs are not marginal utilities; use the greedy solver".into());
        }
        if self.metrics.contains(&MetricKind::Eom) && self.budgets.is_empty() {
            return fail("the eom metric needs at least one budget".into());
        }
        if let Some(levels) = self.declared_levels() {
            self.check_levels(levels)?;
        }
        Ok(())
    }

    /// Loss, solver and metric rules that depend on the level count.
    pub fn check_levels(&self, levels: usize) -> Result<(), PipelineError> {
        let fail = |msg: String| Err(PipelineError::config(msg));
        if self.loss != LossKind::Dpm && levels != 2 {
            return fail(format!(
                "loss {} needs exactly two treatment levels, the data has {levels}",
                self.loss.name()
            ));
        }
        if self.loss.arity() == Arity::PerLevel && levels < 2 {
            return fail("need at least two treatment levels".into());
        }
        if self.solver == SolverChoice::Greedy && levels != 2 {
            return fail(format!("the greedy solver needs two treatment levels, the data has {levels}"));
        }
        for m in &self.metrics {
            if matches!(m, MetricKind::Auuc | MetricKind::Aucc) && levels != 2 {
                return fail(format!("metric {} needs two treatment levels, the data has {levels}", m.name()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(levels: usize) -> DatasetSource {
        DatasetSource::Synth(SynthConfig::new(100, 2, levels, 0.1, 0))
    }

    #[test]
    fn minimal_json_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"dataset": {"source": "synth", "n": 100, "d": 2, "n_levels": 3, "noise_scale": 0.1,
                "propensity": [0.2, 0.3, 0.5], "seed": 0}, "loss": "dpm"}"#,
        )
        .unwrap();
        assert_eq!(cfg.solver, SolverChoice::Algorithm2);
        assert_eq!(cfg.test_fraction, 0.3);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<ExperimentConfig>(
            r#"{"dataset": {"source": "csv", "path": "x.csv", "schema": {"feature_columns": ["a"],
                "treatment_column": "t", "reward_column": "y"}}, "loss": "drp", "budget": 3}"#,
        );
        assert!(err.is_err());
    }

    #[test]
    fn level_rules() {
        assert!(ExperimentConfig::new(synth(3), LossKind::Dum).validate().is_err());
        assert!(ExperimentConfig::new(synth(2), LossKind::Dum).validate().is_ok());
        let mut cfg = ExperimentConfig::new(synth(3), LossKind::Dpm);
        cfg.metrics = vec![MetricKind::Aucc];
        assert!(cfg.validate().is_err());
        cfg.metrics = vec![MetricKind::Eom];
        assert!(cfg.validate().is_err());
        cfg.budgets = vec![1.0, 2.0];
        cfg.validate().unwrap();
    }
}
