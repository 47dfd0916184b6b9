//! Losses over a batch of scores and their exact gradients with respect to
//! the scores.
//!
//! Group weights use batch-local counts (`1/n₁`, `1/n₀`, `1/n_j`), and the
//! uplift softmax normalizes within the batch. With the whole dataset as the
//! batch these are the population losses.

use std::borrow::Borrow;

use crate::dataset::RctSample;
use crate::error::{Error, Result};
use crate::math::{clamp_score, sigmoid, softmax, softplus, SCORE_CLAMP};

/// Loss value, gradient with respect to each score, and how many scores hit
/// the clamp.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub saturated: usize,
}

fn saturated(scores: &[f64]) -> usize {
    scores.iter().filter(|s| s.abs() >= SCORE_CLAMP).count()
}

fn binary_counts<S: Borrow<RctSample>>(batch: &[S]) -> Result<(usize, usize)> {
    let mut n = [0usize; 2];
    for s in batch {
        let t = s.borrow().treatment;
        if t > 1 {
            return Err(Error::Contract(format!(
                "binary loss got treatment level {t}"
            )));
        }
        n[t] += 1;
    }
    Ok((n[0], n[1]))
}

fn check_len(scores: &[f64], expected: usize) -> Result<()> {
    if scores.len() != expected {
        return Err(Error::Contract(format!(
            "{} scores for {expected} entries",
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Contract("non-finite score".into()));
    }
    Ok(())
}

/// Direct uplift loss:
/// `-(1/n₁ Σ_{t=1} y^r ln q - 1/n₀ Σ_{t=0} y^r ln q)` with `q = softmax(s)`.
pub fn dum_loss_grad<S: Borrow<RctSample>>(scores: &[f64], batch: &[S]) -> Result<LossEval> {
    check_len(scores, batch.len())?;
    let (n0, n1) = binary_counts(batch)?;
    if n0 == 0 || n1 == 0 {
        return Err(Error::BatchComposition(format!(
            "uplift loss needs treated and control samples, got n1={n1}, n0={n0}"
        )));
    }
    let s: Vec<f64> = scores.iter().map(|&v| clamp_score(v)).collect();
    let q = softmax(&s);
    let weights: Vec<f64> = batch
        .iter()
        .map(|b| {
            let b = b.borrow();
            if b.treatment == 1 {
                b.reward / n1 as f64
            } else {
                -b.reward / n0 as f64
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let loss = -weights
        .iter()
        .zip(&q)
        .map(|(w, q)| w * q.ln())
        .sum::<f64>();
    let grad = weights
        .iter()
        .zip(&q)
        .map(|(w, q)| -w + q * total)
        .collect();
    Ok(LossEval {
        loss,
        grad,
        saturated: saturated(scores),
    })
}

/// Direct ROI loss with `q = σ(s)`:
/// `-[1/n₁ Σ_{t=1} (y^r ln(q/(1-q)) + y^c ln(1-q)) - 1/n₀ Σ_{t=0} (…)]`.
///
/// `ln(q/(1-q)) = s` and `ln(1-q) = -softplus(s)`, so no logarithm of a
/// saturated probability is ever taken. A group absent from the batch simply
/// contributes no term.
pub fn drp_loss_grad<S: Borrow<RctSample>>(scores: &[f64], batch: &[S]) -> Result<LossEval> {
    check_len(scores, batch.len())?;
    if batch.is_empty() {
        return Err(Error::BatchComposition("empty batch".into()));
    }
    let (n0, n1) = binary_counts(batch)?;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(batch.len());
    for (b, &raw) in batch.iter().zip(scores) {
        let b = b.borrow();
        let s = clamp_score(raw);
        let sign = if b.treatment == 1 {
            -1.0 / n1 as f64
        } else {
            1.0 / n0 as f64
        };
        loss += sign * (b.reward * s - b.cost * softplus(s));
        grad.push(sign * (b.reward - sigmoid(s) * b.cost));
    }
    Ok(LossEval {
        loss,
        grad,
        saturated: saturated(scores),
    })
}

/// Analytic `∂²L/∂s_i²` of the ROI loss. Each term depends on one score,
/// so the Hessian is diagonal. Treated entries are `q(1-q)y^c/n₁`, control
/// entries `-q(1-q)y^c/n₀`; summed over samples that share a parameter they
/// give `q(1-q)` times the empirical cost uplift of that group.
pub fn drp_hessian_diag<S: Borrow<RctSample>>(scores: &[f64], batch: &[S]) -> Result<Vec<f64>> {
    check_len(scores, batch.len())?;
    let (n0, n1) = binary_counts(batch)?;
    Ok(batch
        .iter()
        .zip(scores)
        .map(|(b, &raw)| {
            let b = b.borrow();
            let q = sigmoid(clamp_score(raw));
            let sign = if b.treatment == 1 {
                -1.0 / n1 as f64
            } else {
                1.0 / n0 as f64
            };
            -sign * q * (1.0 - q) * b.cost
        })
        .collect())
}

/// Marginal-utility loss over `L - 1` heads (0-based levels), `q = σ(s)`:
///
/// `-[Σ_{j≥1} Σ_{t=j} (q_{j-1} y^r - q_{j-1}² y^c)/n_j
///    - Σ_{j≤L-2} Σ_{t=j} (q_j y^r - q_j² y^c)/n_j]`
///
/// `scores` is row-major `batch.len() × (L - 1)`. Every level must occur in
/// the batch, since each one feeds at least one head.
pub fn dpm_loss_grad<S: Borrow<RctSample>>(
    scores: &[f64],
    batch: &[S],
    n_levels: usize,
) -> Result<LossEval> {
    if n_levels < 2 {
        return Err(Error::Contract("marginal loss needs at least two levels".into()));
    }
    let heads = n_levels - 1;
    check_len(scores, batch.len() * heads)?;
    let mut counts = vec![0usize; n_levels];
    for b in batch {
        let t = b.borrow().treatment;
        if t >= n_levels {
            return Err(Error::Contract(format!("treatment {t} outside 0..{n_levels}")));
        }
        counts[t] += 1;
    }
    if let Some(j) = counts.iter().position(|&n| n == 0) {
        return Err(Error::BatchComposition(format!(
            "level {j} has no samples in the batch"
        )));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; scores.len()];
    for (i, b) in batch.iter().enumerate() {
        let b = b.borrow();
        let t = b.treatment;
        let inv = 1.0 / counts[t] as f64;
        let mut term = |head: usize, sign: f64| {
            let q = sigmoid(clamp_score(scores[i * heads + head]));
            loss += sign * inv * (q * b.reward - q * q * b.cost);
            grad[i * heads + head] += sign * inv * (b.reward - 2.0 * q * b.cost) * q * (1.0 - q);
        };
        if t >= 1 {
            term(t - 1, -1.0);
        }
        if t + 1 < n_levels {
            term(t, 1.0);
        }
    }
    Ok(LossEval {
        loss,
        grad,
        saturated: saturated(scores),
    })
}

/// Ranking loss `τ̄^c / τ̄^r` with within-group softmax weights of
/// `tanh(s)`. It has no stationary point unless every individual shares the
/// same ROI, which makes it a useful negative control.
pub fn direct_rank_loss_grad<S: Borrow<RctSample>>(scores: &[f64], batch: &[S]) -> Result<LossEval> {
    check_len(scores, batch.len())?;
    let (n0, n1) = binary_counts(batch)?;
    if n0 == 0 || n1 == 0 {
        return Err(Error::BatchComposition(format!(
            "ranking loss needs treated and control samples, got n1={n1}, n0={n0}"
        )));
    }
    let q: Vec<f64> = scores.iter().map(|&s| clamp_score(s).tanh()).collect();
    // Group-wise softmax of q; the max over q is at most 1, so plain exp is safe.
    let e: Vec<f64> = q.iter().map(|v| v.exp()).collect();
    let mut z = [0.0; 2];
    for (b, ei) in batch.iter().zip(&e) {
        z[b.borrow().treatment] += ei;
    }
    let p: Vec<f64> = batch
        .iter()
        .zip(&e)
        .map(|(b, ei)| ei / z[b.borrow().treatment])
        .collect();
    // Per-group p-weighted outcome means.
    let mut mr = [0.0; 2];
    let mut mc = [0.0; 2];
    for (b, pi) in batch.iter().zip(&p) {
        let b = b.borrow();
        mr[b.treatment] += pi * b.reward;
        mc[b.treatment] += pi * b.cost;
    }
    let tau_r = mr[1] - mr[0];
    let tau_c = mc[1] - mc[0];
    if tau_r.abs() < 1e-9 {
        return Err(Error::UndefinedLoss(format!(
            "weighted reward uplift {tau_r:e} is too close to zero"
        )));
    }
    let loss = tau_c / tau_r;
    let grad = batch
        .iter()
        .zip(p.iter().zip(&q))
        .map(|(b, (pi, qi))| {
            let b = b.borrow();
            let g = b.treatment;
            let sign = if g == 1 { 1.0 } else { -1.0 };
            let d_tau_r = sign * pi * (b.reward - mr[g]);
            let d_tau_c = sign * pi * (b.cost - mc[g]);
            (d_tau_c - loss * d_tau_r) / tau_r * (1.0 - qi * qi)
        })
        .collect();
    Ok(LossEval {
        loss,
        grad,
        saturated: saturated(scores),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(treatment: usize, reward: f64, cost: f64) -> RctSample {
        RctSample {
            features: vec![0.0],
            treatment,
            reward,
            cost,
        }
    }

    #[test]
    fn dum_symmetric_scores_cancel() {
        let batch = [s(1, 1.0, 0.0), s(0, 1.0, 0.0)];
        let e = dum_loss_grad(&[0.0, 0.0], &batch).unwrap();
        assert_eq!(e.loss, 0.0);
        assert_eq!(e.grad, vec![-1.0, 1.0]);
    }

    #[test]
    fn dum_rejects_single_group() {
        let batch = [s(1, 1.0, 0.0), s(1, 2.0, 0.0)];
        assert!(matches!(
            dum_loss_grad(&[0.0, 0.0], &batch),
            Err(Error::BatchComposition(_))
        ));
    }

    #[test]
    fn drp_single_treated_sample() {
        let e = drp_loss_grad(&[0.0], &[s(1, 1.0, 1.0)]).unwrap();
        assert!((e.loss - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(e.grad, vec![-0.5]);
    }

    #[test]
    fn drp_clamps_and_reports_saturation() {
        let e = drp_loss_grad(&[1e6, -40.0], &[s(1, 1.0, 1.0), s(0, 1.0, 2.0)]).unwrap();
        assert!(e.loss.is_finite());
        assert_eq!(e.saturated, 2);
    }

    #[test]
    fn dpm_two_levels_is_single_head() {
        let batch = [s(1, 0.8, 1.5), s(0, 0.2, 0.5), s(0, 0.3, 0.1)];
        let scores = [0.3, -0.2, 1.1];
        let e = dpm_loss_grad(&scores, &batch, 2).unwrap();
        let q: Vec<f64> = scores.iter().map(|&v| sigmoid(v)).collect();
        let f = |i: usize| q[i] * batch[i].reward - q[i] * q[i] * batch[i].cost;
        let expected = -(f(0) - (f(1) + f(2)) / 2.0);
        assert!((e.loss - expected).abs() < 1e-15);
    }

    #[test]
    fn dpm_requires_every_level() {
        let batch = [s(0, 1.0, 1.0), s(2, 1.0, 1.0)];
        assert!(matches!(
            dpm_loss_grad(&[0.0; 4], &batch, 3),
            Err(Error::BatchComposition(_))
        ));
    }

    #[test]
    fn direct_rank_uniform_scores() {
        let batch = [s(1, 3.0, 2.0), s(1, 1.0, 2.0), s(0, 1.0, 1.0), s(0, 1.0, 0.0)];
        let e = direct_rank_loss_grad(&[0.4; 4], &batch).unwrap();
        // (mean Δcost) / (mean Δreward) = (2 - 0.5) / (2 - 1)
        assert!((e.loss - 1.5).abs() < 1e-12);
    }

    #[test]
    fn direct_rank_blows_up_on_flat_reward() {
        let batch = [s(1, 1.0, 2.0), s(0, 1.0, 1.0)];
        assert!(matches!(
            direct_rank_loss_grad(&[0.0, 0.0], &batch),
            Err(Error::UndefinedLoss(_))
        ));
    }
}
