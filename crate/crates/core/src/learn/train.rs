use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{direct_rank_loss_grad, dpm_loss_grad, drp_loss_grad, dum_loss_grad, LossEval};
use super::{LossKind, Model, Scorer};
use crate::dataset::{RctDataset, RctSample};
use crate::error::{Error, Result};

/// Plain gradient descent settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// 0 means full batch.
    #[serde(default)]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    /// Reward scale `γ ∈ (0, 1]`; derived from the data when absent.
    #[serde(default)]
    pub scale_gamma: Option<f64>,
    /// Quantile of the scaled rewards at which they are truncated; `1.0`
    /// disables truncation.
    #[serde(default = "default_truncate_hi")]
    pub truncate_hi: f64,
    /// Halve the step size whenever the loss goes up. In full-batch mode the
    /// offending step is also rejected, so the trace never increases.
    #[serde(default = "default_true")]
    pub halve_on_increase: bool,
    /// Stop once the full-batch parameter gradient norm drops to this.
    #[serde(default)]
    pub grad_tol: f64,
}

fn default_truncate_hi() -> f64 {
    0.999
}

fn default_true() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 100,
            batch_size: 0,
            seed: 0,
            scale_gamma: None,
            truncate_hi: default_truncate_hi(),
            halve_on_increase: true,
            grad_tol: 0.0,
        }
    }
}

impl TrainConfig {
    fn check(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("invalid learning rate {}", self.learning_rate)));
        }
        if let Some(g) = self.scale_gamma {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::Config(format!("scale_gamma must lie in (0, 1], got {g}")));
            }
        }
        if !(self.truncate_hi > 0.0 && self.truncate_hi <= 1.0) {
            return Err(Error::Config(format!(
                "truncate_hi is a quantile in (0, 1], got {}",
                self.truncate_hi
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss after each epoch (mean over batches in mini-batch mode).
    pub loss_trace: Vec<f64>,
    pub gamma: f64,
    /// Reward cap applied after scaling, if truncation was active.
    pub truncation_cap: Option<f64>,
    pub final_learning_rate: f64,
    pub halvings: usize,
    pub skipped_batches: usize,
    /// Scores at the clamp in the last evaluated batch.
    pub saturated_scores: usize,
    pub epochs_run: usize,
    /// Stopped because the gradient norm reached `grad_tol`.
    pub converged: bool,
}

/// `min(1, ½·Δc/Δr)` from the top-vs-bottom level group means, or 1 when
/// either uplift is not positive.
pub fn default_gamma(ds: &RctDataset) -> f64 {
    let l = ds.n_levels();
    let mut sum_r = vec![0.0; l];
    let mut sum_c = vec![0.0; l];
    for s in ds.samples() {
        sum_r[s.treatment] += s.reward;
        sum_c[s.treatment] += s.cost;
    }
    let counts = ds.counts();
    if counts[0] == 0 || counts[l - 1] == 0 {
        return 1.0;
    }
    let mean = |sum: &[f64], j: usize| sum[j] / counts[j] as f64;
    let dr = mean(&sum_r, l - 1) - mean(&sum_r, 0);
    let dc = mean(&sum_c, l - 1) - mean(&sum_c, 0);
    if dr > 0.0 && dc > 0.0 {
        (0.5 * dc / dr).min(1.0)
    } else {
        1.0
    }
}

fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    v[idx]
}

struct Objective<'a> {
    kind: LossKind,
    n_levels: usize,
    samples: &'a [RctSample],
    rows: Vec<usize>,
}

impl Objective<'_> {
    fn eval(&self, scorer: &Scorer, idx: &[usize]) -> Result<(LossEval, Vec<f64>)> {
        let heads = scorer.heads();
        let mut scores = Vec::with_capacity(idx.len() * heads);
        let batch: Vec<&RctSample> = idx.iter().map(|&i| &self.samples[i]).collect();
        for &i in idx {
            for h in 0..heads {
                scores.push(scorer.score_encoded(&self.samples[i].features, self.rows[i], h));
            }
        }
        let eval = match self.kind {
            LossKind::Dum => dum_loss_grad(&scores, &batch)?,
            LossKind::Drp => drp_loss_grad(&scores, &batch)?,
            LossKind::Dpm => dpm_loss_grad(&scores, &batch, self.n_levels)?,
            LossKind::DirectRank => direct_rank_loss_grad(&scores, &batch)?,
        };
        let mut param_grad = vec![0.0; scorer.params().len()];
        for (b, &i) in idx.iter().enumerate() {
            for h in 0..heads {
                let g = eval.grad[b * heads + h];
                if g != 0.0 {
                    scorer.backprop_encoded(&self.samples[i].features, self.rows[i], h, g, &mut param_grad);
                }
            }
        }
        Ok((eval, param_grad))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Fits `scorer` on `ds` under `kind` with seeded, deterministic gradient
/// descent. Rewards are scaled by `γ` (for the ROI and marginal losses) and
/// truncated before the loss sees them.
pub fn train(
    mut scorer: Scorer,
    ds: &RctDataset,
    kind: LossKind,
    cfg: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    cfg.check()?;
    kind.check_compat(&scorer, ds.n_levels())?;
    if ds.is_empty() {
        return Err(Error::InvalidDataset("cannot train on an empty dataset".into()));
    }
    let gamma = if kind.uses_gamma() {
        cfg.scale_gamma.unwrap_or_else(|| default_gamma(ds))
    } else {
        1.0
    };
    let scaled_rewards: Vec<f64> = ds.samples().iter().map(|s| s.reward * gamma).collect();
    let cap = (cfg.truncate_hi < 1.0).then(|| quantile(&scaled_rewards, cfg.truncate_hi));
    let samples: Vec<RctSample> = ds
        .samples()
        .iter()
        .zip(&scaled_rewards)
        .map(|(s, &r)| RctSample {
            features: s.features.clone(),
            treatment: s.treatment,
            reward: cap.map_or(r, |c| r.min(c)),
            cost: s.cost,
        })
        .collect();
    let rows = samples
        .iter()
        .map(|s| scorer.encode(&s.features))
        .collect::<Result<Vec<_>>>()?;
    let objective = Objective {
        kind,
        n_levels: ds.n_levels(),
        samples: &samples,
        rows,
    };

    let mut report = TrainReport {
        loss_trace: Vec::with_capacity(cfg.epochs),
        gamma,
        truncation_cap: cap,
        final_learning_rate: cfg.learning_rate,
        halvings: 0,
        skipped_batches: 0,
        saturated_scores: 0,
        epochs_run: 0,
        converged: false,
    };
    let n = samples.len();
    let mut lr = cfg.learning_rate;

    if cfg.batch_size == 0 || cfg.batch_size >= n {
        let all: Vec<usize> = (0..n).collect();
        let (mut current, mut grad) = objective.eval(&scorer, &all)?;
        'epochs: for epoch in 0..cfg.epochs {
            if norm(&grad) <= cfg.grad_tol {
                report.converged = true;
                break;
            }
            loop {
                let mut candidate = scorer.clone();
                for (p, g) in candidate.params_mut().iter_mut().zip(&grad) {
                    *p -= lr * g;
                }
                let (eval, cand_grad) = objective.eval(&candidate, &all)?;
                let worse = !eval.loss.is_finite() || eval.loss > current.loss;
                if worse && cfg.halve_on_increase {
                    lr *= 0.5;
                    report.halvings += 1;
                    if lr <= cfg.learning_rate * 1e-18 {
                        // No step size improves the loss any further.
                        break 'epochs;
                    }
                    continue;
                }
                if !eval.loss.is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        loss: eval.loss,
                    });
                }
                scorer = candidate;
                current = eval;
                grad = cand_grad;
                break;
            }
            report.loss_trace.push(current.loss);
            report.epochs_run = epoch + 1;
        }
        report.saturated_scores = current.saturated;
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut order: Vec<usize> = (0..n).collect();
        let mut previous = f64::INFINITY;
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            let mut used = 0usize;
            for chunk in order.chunks(cfg.batch_size) {
                let (eval, grad) = match objective.eval(&scorer, chunk) {
                    Ok(v) => v,
                    Err(Error::BatchComposition(_) | Error::UndefinedLoss(_)) => {
                        report.skipped_batches += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                if !eval.loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::Diverged {
                        epoch,
                        loss: eval.loss,
                    });
                }
                for (p, g) in scorer.params_mut().iter_mut().zip(&grad) {
                    *p -= lr * g;
                }
                total += eval.loss;
                used += 1;
                report.saturated_scores = eval.saturated;
            }
            if used == 0 {
                return Err(Error::BatchComposition(format!(
                    "epoch {epoch}: no mini-batch of size {} had a valid composition",
                    cfg.batch_size
                )));
            }
            let mean = total / used as f64;
            if cfg.halve_on_increase && mean > previous {
                lr *= 0.5;
                report.halvings += 1;
            }
            previous = mean;
            report.loss_trace.push(mean);
            report.epochs_run = epoch + 1;
        }
    }
    report.final_learning_rate = lr;
    Ok((
        Model {
            kind,
            n_levels: ds.n_levels(),
            gamma,
            scorer,
        },
        report,
    ))
}
