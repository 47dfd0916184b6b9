mod common;

use common::{fd_gradient, random_batch, relative_error, rng};
use decision_factor::dataset::RctSample;
use decision_factor::learn::{
    direct_rank_loss_grad, dpm_loss_grad, drp_hessian_diag, drp_loss_grad, dum_loss_grad, Arity, LossEval,
    Scorer,
};
use decision_factor::Result;
use rand::Rng;

const H: f64 = 1e-6;
const PROBES: usize = 100;

fn check(
    levels: usize,
    heads: usize,
    spread: f64,
    seed: u64,
    loss: impl Fn(&[f64], &[RctSample]) -> Result<LossEval>,
) {
    let mut r = rng(seed);
    for probe in 0..PROBES {
        let n = r.random_range(levels.max(2)..12);
        let batch = random_batch(&mut r, n, levels);
        let scores: Vec<f64> = (0..n * heads).map(|_| r.random_range(-spread..spread)).collect();
        let analytic = loss(&scores, &batch).unwrap().grad;
        let numeric = fd_gradient(|s| loss(s, &batch).unwrap().loss, &scores, H);
        let err = relative_error(&analytic, &numeric);
        assert!(err < 1e-6, "probe {probe}: relative error {err:e}");
    }
}

#[test]
fn uplift_gradient_matches_finite_differences() {
    check(2, 1, 3.0, 1, dum_loss_grad);
}

#[test]
fn roi_gradient_matches_finite_differences() {
    check(2, 1, 3.0, 2, drp_loss_grad);
}

#[test]
fn marginal_gradient_matches_finite_differences() {
    for levels in 2..=4 {
        check(levels, levels - 1, 3.0, 3 + levels as u64, move |s, b| dpm_loss_grad(s, b, levels));
    }
}

#[test]
fn direct_rank_gradient_matches_finite_differences() {
    // Keep the reward uplift away from zero so the ratio is well defined.
    let mut r = rng(9);
    let mut checked = 0;
    while checked < PROBES {
        let n = r.random_range(4..12);
        let batch = random_batch(&mut r, n, 2);
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(-1.5..1.5)).collect();
        let Ok(eval) = direct_rank_loss_grad(&scores, &batch) else { continue };
        if eval.loss.abs() > 50.0 {
            continue;
        }
        let numeric = fd_gradient(|s| direct_rank_loss_grad(s, &batch).unwrap().loss, &scores, H);
        let err = relative_error(&eval.grad, &numeric);
        assert!(err < 1e-6, "relative error {err:e}");
        checked += 1;
    }
}

#[test]
fn roi_hessian_diagonal_matches_gradient_differences() {
    let mut r = rng(21);
    for _ in 0..PROBES {
        let n = r.random_range(2..10);
        let batch = random_batch(&mut r, n, 2);
        let scores: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let diag = drp_hessian_diag(&scores, &batch).unwrap();
        for (k, &d) in diag.iter().enumerate() {
            let numeric = fd_gradient(|s| drp_loss_grad(s, &batch).unwrap().grad[k], &scores, 1e-5);
            // The loss is separable in the scores: only the diagonal survives.
            for (j, v) in numeric.iter().enumerate() {
                let expected = if j == k { d } else { 0.0 };
                assert!((v - expected).abs() < 1e-8, "H[{k}][{j}] = {v}, expected {expected}");
            }
        }
    }
}

#[test]
fn scorer_parameter_gradient_matches_finite_differences() {
    let mut r = rng(33);
    for _ in 0..PROBES {
        let d = r.random_range(1..5);
        let mut scorer = Scorer::linear(d, Arity::PerLevel, 3).unwrap();
        for p in scorer.params_mut() {
            *p = r.random_range(-1.0..1.0);
        }
        let x: Vec<f64> = (0..d).map(|_| r.random_range(-2.0..2.0)).collect();
        let head = r.random_range(0..2);
        let analytic = scorer.score_gradient(&x, head).unwrap();
        let params = scorer.params().to_vec();
        let numeric = fd_gradient(
            |p| {
                let mut s = scorer.clone();
                s.params_mut().copy_from_slice(p);
                s.score(&x, head).unwrap()
            },
            &params,
            H,
        );
        assert!(relative_error(&analytic, &numeric) < 1e-6);
    }
}
