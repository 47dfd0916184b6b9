//! Direct learning of decision factors.
//!
//! Three losses each make a scorer converge to a quantity an allocation
//! algorithm only needs to sort or compare:
//!
//! * [`LossKind::Dum`]: softmax share of the reward uplift `τ^r`, ranking CATE.
//! * [`LossKind::Drp`]: `σ(s) → γ·τ^r/τ^c`, the ROI used by greedy knapsack.
//! * [`LossKind::Dpm`]: `σ(s_j) → ½·γ·ℓ_j`, the marginal utility compared
//!   against the dual multiplier when allocating multiple levels.
//!
//! [`LossKind::DirectRank`] is a ratio-of-uplifts ranking loss kept as a
//! negative control: it has no stationary point when ROI is heterogeneous.

mod baseline;
mod loss;
mod predict;
mod scorer;
mod train;

use serde::{Deserialize, Serialize};

pub use baseline::TwoPhaseModel;
pub use loss::{
    direct_rank_loss_grad, dpm_loss_grad, drp_hessian_diag, drp_loss_grad, dum_loss_grad,
    LossEval,
};
pub use predict::{predict_decision_factor, Estimates};
pub use scorer::{Arity, KeyMap, Scorer, ScorerKind};
pub use train::{default_gamma, train, TrainConfig, TrainReport};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Dum,
    Drp,
    Dpm,
    DirectRank,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Dum => "dum",
            LossKind::Drp => "drp",
            LossKind::Dpm => "dpm",
            LossKind::DirectRank => "direct_rank",
        }
    }

    /// Arity a scorer trained with this loss must have.
    pub fn arity(self) -> Arity {
        match self {
            LossKind::Dpm => Arity::PerLevel,
            _ => Arity::Single,
        }
    }

    /// Whether rewards are multiplied by `γ` before the loss sees them.
    pub fn uses_gamma(self) -> bool {
        matches!(self, LossKind::Drp | LossKind::Dpm)
    }

    /// Checks the level count and scorer arity this loss requires.
    pub fn check_compat(self, scorer: &Scorer, n_levels: usize) -> Result<()> {
        if self != LossKind::Dpm && n_levels != 2 {
            return Err(Error::Contract(format!(
                "{} needs exactly two treatment levels, got {n_levels}",
                self.name()
            )));
        }
        if scorer.arity() != self.arity() {
            return Err(Error::Contract(format!(
                "{} needs a {:?} scorer, got {:?}",
                self.name(),
                self.arity(),
                scorer.arity()
            )));
        }
        let heads = match self.arity() {
            Arity::Single => 1,
            Arity::PerLevel => n_levels - 1,
        };
        if scorer.heads() != heads {
            return Err(Error::Contract(format!(
                "scorer has {} heads, {} levels need {heads}",
                scorer.heads(),
                n_levels
            )));
        }
        Ok(())
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dum" => Ok(LossKind::Dum),
            "drp" => Ok(LossKind::Drp),
            "dpm" => Ok(LossKind::Dpm),
            "direct_rank" => Ok(LossKind::DirectRank),
            other => Err(Error::Config(format!("unknown loss kind `{other}`"))),
        }
    }
}

/// A trained scorer together with the loss it was fitted under and the
/// reward scale `γ` needed to invert its outputs. This is the model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub kind: LossKind,
    pub n_levels: usize,
    pub gamma: f64,
    #[serde(flatten)]
    pub scorer: Scorer,
}

impl Model {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
