//! The acceptance suite: ten checks, each returning pass/fail with the
//! numbers behind the verdict. Shared by the `bench` subcommand and the
//! `acceptance` test target.
//!
//! The finite-difference and enumeration oracles used here are kept local
//! to this module; the library itself never calls them.

use std::time::Instant;

use decision_factor::dataset::RctSample;
use decision_factor::eval::{
    aucc, auuc, budget_sweep, build_quintuples, eom, mt_aucc, mt_cost_curve, Planner, PolicyTable,
};
use decision_factor::learn::{
    direct_rank_loss_grad, dpm_loss_grad, drp_hessian_diag, drp_loss_grad, dum_loss_grad,
    predict_decision_factor, train, Arity, LossEval, LossKind, Scorer, TrainConfig, TwoPhaseModel,
};
use decision_factor::math::softmax;
use decision_factor::solve::{
    algorithm2_choice, algorithm2_mtbap, compute_marginals, greedy_btap, knapsack_oracle, lagrangian_choice,
    lagrangian_mtbap, mckp_oracle, MultiTreatmentInstance,
};
use decision_factor::stats::{mean, paired_t_test_greater, spearman, std_error};
use decision_factor::synth::{gen_btap_dataset, gen_mtbap_dataset, SynthConfig};
use decision_factor::{derive_seed, RctDataset};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<28} {:7.1}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

/// Runs `check`, timing it and turning a panic-free `(passed, detail)` into
/// a result line.
fn timed(id: usize, name: &'static str, check: impl FnOnce() -> (bool, String)) -> CriterionResult {
    let start = Instant::now();
    let (passed, detail) = check();
    CriterionResult {
        id,
        name,
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub type Criterion = fn() -> CriterionResult;

/// All criteria in order.
pub const CRITERIA: [Criterion; 10] = [
    gradient_correctness,
    uplift_shares,
    roi_convexity_and_recovery,
    marginal_recovery,
    direct_rank_instability,
    comparison_rule_equivalence,
    greedy_and_dual_bounds,
    metric_sanity,
    eom_unbiasedness,
    end_to_end_ordering,
];

pub fn run_all() -> Vec<CriterionResult> {
    CRITERIA.iter().map(|c| c()).collect()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Central finite-difference gradient of `f` at `x`.
fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖∞ / max(‖a‖∞, ‖b‖∞)`, or 0 when both vanish.
fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().chain(b).map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Random batch with every level in `0..levels` present.
fn random_batch(r: &mut ChaCha8Rng, n: usize, levels: usize) -> Vec<RctSample> {
    (0..n)
        .map(|i| RctSample {
            features: vec![r.random_range(-1.0..1.0)],
            treatment: if i < levels { i } else { r.random_range(0..levels) },
            reward: r.random_range(0.0..2.0),
            cost: r.random_range(0.0..2.0),
        })
        .collect()
}

fn per_key(keys: &[usize], values: &[f64], k: usize) -> Vec<f64> {
    let mut sum = vec![0.0; k];
    let mut count = vec![0usize; k];
    for (&key, &v) in keys.iter().zip(values) {
        sum[key] += v;
        count[key] += 1;
    }
    sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect()
}

const FD_STEP: f64 = 1e-6;
const PROBES: usize = 100;

/// Worst relative error over `PROBES` random batches; probes where `loss`
/// is undefined or huge are redrawn.
fn worst_fd_error(
    levels: usize,
    heads: usize,
    spread: f64,
    seed: u64,
    loss: impl Fn(&[f64], &[RctSample]) -> decision_factor::Result<LossEval>,
) -> f64 {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < PROBES {
        let n = r.random_range((levels + 2)..12);
        let batch = random_batch(&mut r, n, levels);
        let scores: Vec<f64> = (0..n * heads).map(|_| r.random_range(-spread..spread)).collect();
        let Ok(eval) = loss(&scores, &batch) else { continue };
        if eval.loss.abs() > 50.0 {
            continue;
        }
        let numeric = fd_gradient(|s| loss(s, &batch).map_or(f64::NAN, |e| e.loss), &scores, FD_STEP);
        worst = worst.max(relative_error(&eval.grad, &numeric));
        checked += 1;
    }
    worst
}

pub fn gradient_correctness() -> CriterionResult {
    timed(1, "gradient correctness", || {
        let start = Instant::now();
        let errors = [
            ("dum", worst_fd_error(2, 1, 3.0, 1, dum_loss_grad)),
            ("drp", worst_fd_error(2, 1, 3.0, 2, drp_loss_grad)),
            ("dpm", worst_fd_error(4, 3, 3.0, 3, |s, b| dpm_loss_grad(s, b, 4))),
            ("direct_rank", worst_fd_error(2, 1, 1.5, 4, direct_rank_loss_grad)),
        ];
        let secs = start.elapsed().as_secs_f64();
        let passed = errors.iter().all(|(_, e)| *e < 1e-6) && secs < 10.0;
        let detail = errors
            .iter()
            .map(|(n, e)| format!("{n} {e:.1e}"))
            .collect::<Vec<_>>()
            .join(", ");
        (passed, format!("max rel. error {detail} (< 1e-6, 100 probes each)"))
    })
}

const KEYS: usize = 8;

/// Full batch, no truncation, long enough to converge on a tabular scorer.
fn exact_cfg() -> TrainConfig {
    TrainConfig {
        learning_rate: 50.0,
        epochs: 20_000,
        truncate_hi: 1.0,
        grad_tol: 1e-12,
        ..TrainConfig::default()
    }
}

pub fn uplift_shares() -> CriterionResult {
    timed(2, "uplift share recovery", || {
        let cfg = SynthConfig::new(KEYS * 2 * 5, 3, 2, 0.0, 7).balanced_vocabulary(KEYS);
        let (ds, truth) = gen_btap_dataset(&cfg).expect("synthetic data");
        let keys = truth.keys.clone().expect("vocabulary keys");
        let scorer = Scorer::tabular(ds.samples(), Arity::Single, 2).expect("scorer");
        let (model, _) = train(scorer, &ds, LossKind::Dum, &exact_cfg()).expect("training");
        let tau = per_key(&keys, &truth.cate_r, KEYS);
        let total: f64 = tau.iter().sum();
        let mut s = vec![0.0; KEYS];
        for (x, &k) in ds.samples().iter().zip(&keys) {
            s[k] = model.scorer.score(&x.features, 0).expect("score");
        }
        // Keys are equally sized, so a key's share is its softmax weight.
        let worst = softmax(&s)
            .iter()
            .zip(&tau)
            .map(|(q, t)| (q - t / total).abs())
            .fold(0.0, f64::max);
        let rho = spearman(&s, &tau);
        (
            worst <= 1e-3 && rho == 1.0,
            format!("max |q - tau/sum| = {worst:.2e} (<= 1e-3), spearman {rho}"),
        )
    })
}

pub fn roi_convexity_and_recovery() -> CriterionResult {
    timed(3, "roi convexity and recovery", || {
        let cfg = SynthConfig::new(KEYS * 2 * 5, 3, 2, 0.0, 8).balanced_vocabulary(KEYS);
        let (ds, truth) = gen_btap_dataset(&cfg).expect("synthetic data");
        let keys = truth.keys.clone().expect("vocabulary keys");
        let mut r = rng(4);
        let mut min_curv = f64::INFINITY;
        for _ in 0..PROBES {
            let key_score: Vec<f64> = (0..KEYS).map(|_| r.random_range(-5.0..5.0)).collect();
            let scores: Vec<f64> = keys.iter().map(|&k| key_score[k]).collect();
            let diag = drp_hessian_diag(&scores, ds.samples()).expect("hessian");
            let mut curv = vec![0.0; KEYS];
            for (&k, h) in keys.iter().zip(&diag) {
                curv[k] += h;
            }
            min_curv = curv.into_iter().fold(min_curv, f64::min);
        }
        let scorer = Scorer::tabular(ds.samples(), Arity::Single, 2).expect("scorer");
        let (model, report) = train(scorer, &ds, LossKind::Drp, &exact_cfg()).expect("training");
        let monotone = report.loss_trace.windows(2).all(|w| w[1] <= w[0]);
        let est = predict_decision_factor(&model, ds.samples(), LossKind::Drp).expect("predict");
        let worst = est
            .values
            .iter()
            .zip(truth.roi())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        (
            min_curv > 0.0 && worst <= 1e-3 && monotone,
            format!(
                "min per-key curvature {min_curv:.2e} (> 0), max |q/gamma - roi| = {worst:.2e} (<= 1e-3), trace non-increasing: {monotone}"
            ),
        )
    })
}

pub fn marginal_recovery() -> CriterionResult {
    timed(4, "marginal utility recovery", || {
        let levels = 4;
        let cfg = SynthConfig::new(KEYS * levels * 5, 3, levels, 0.0, 9).balanced_vocabulary(KEYS);
        let (ds, truth) = gen_mtbap_dataset(&cfg).expect("synthetic data");
        let scorer = Scorer::tabular(ds.samples(), Arity::PerLevel, levels).expect("scorer");
        let (model, _) = train(scorer, &ds, LossKind::Dpm, &exact_cfg()).expect("training");
        let est = predict_decision_factor(&model, ds.samples(), LossKind::Dpm).expect("predict");
        let mut worst: f64 = 0.0;
        for (i, row) in truth.marginal.iter().enumerate() {
            for (j, l) in row.iter().enumerate() {
                worst = worst.max((est.value(i, j) - l).abs());
            }
        }
        (worst <= 1e-3, format!("max |2q/gamma - l| = {worst:.2e} (<= 1e-3), L = {levels}"))
    })
}

/// Synthetic ROI benchmark shared by the ranking comparison.
pub const AUCC_SEEDS: u64 = 20;
pub const AUCC_N: usize = 100_000;

/// Full-batch settings used for both learners in the ranking comparison.
pub fn ranking_train_cfg() -> TrainConfig {
    TrainConfig {
        learning_rate: 5.0,
        epochs: 1_000,
        ..TrainConfig::default()
    }
}

/// Held-out AUCC of `(DRP, DirectRank)` decision factors for one seed.
pub fn aucc_pair(seed: u64) -> (f64, f64) {
    let (ds, _) = gen_btap_dataset(&SynthConfig::new(AUCC_N, 4, 2, 0.5, seed)).expect("synthetic data");
    let (train_ds, test) = ds.split(0.3, derive_seed(seed, 2)).expect("split");
    let cfg = ranking_train_cfg();
    let fit = |kind: LossKind| {
        let (m, _) = train(Scorer::linear(4, Arity::Single, 2).expect("scorer"), &train_ds, kind, &cfg).expect("training");
        let est = predict_decision_factor(&m, test.samples(), kind).expect("predict");
        aucc(&test, &est.values).expect("aucc")
    };
    (fit(LossKind::Drp), fit(LossKind::DirectRank))
}

/// Two balanced keys with the given `(τ^r, τ^c)`.
fn two_key_trial(effects: [(f64, f64); 2]) -> (RctDataset, Vec<usize>) {
    let mut samples = Vec::new();
    let mut keys = Vec::new();
    for (k, &(tr, tc)) in effects.iter().enumerate() {
        for rep in 0..4 {
            let t = rep % 2;
            samples.push(RctSample {
                features: vec![k as f64],
                treatment: t,
                reward: 1.0 + t as f64 * tr,
                cost: 0.5 + t as f64 * tc,
            });
            keys.push(k);
        }
    }
    (RctDataset::new(samples, 2, 1).expect("two-key trial"), keys)
}

pub fn direct_rank_instability() -> CriterionResult {
    timed(5, "direct rank vs roi loss", || {
        let (ds, keys) = two_key_trial([(1.0, 1.0), (1.0, 2.0)]);
        let mut r = rng(12);
        let mut min_norm = f64::INFINITY;
        for _ in 0..PROBES {
            let key_score = [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)];
            let scores: Vec<f64> = keys.iter().map(|&k| key_score[k]).collect();
            let g = direct_rank_loss_grad(&scores, ds.samples()).expect("loss").grad;
            let mut per = [0.0; 2];
            for (&k, v) in keys.iter().zip(&g) {
                per[k] += v;
            }
            min_norm = min_norm.min((per[0].powi(2) + per[1].powi(2)).sqrt());
        }
        let pairs: Vec<(f64, f64)> = (0..AUCC_SEEDS).into_par_iter().map(aucc_pair).collect();
        let drp: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let rank: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let t = paired_t_test_greater(&drp, &rank);
        let passed = min_norm >= 1e-4 && mean(&drp) > mean(&rank) && t.p_value < 0.05;
        (
            passed,
            format!(
                "min grad norm {min_norm:.2e} (>= 1e-4); AUCC drp {:.4} vs direct_rank {:.4} over {AUCC_SEEDS} seeds, p = {:.4} (< 0.05)",
                mean(&drp),
                mean(&rank),
                t.p_value
            ),
        )
    })
}

/// Strictly increasing rows with strictly decreasing marginal utilities.
fn random_monotone(r: &mut ChaCha8Rng, m: usize, levels: usize) -> MultiTreatmentInstance {
    loop {
        let mut rs = Vec::with_capacity(m);
        let mut cs = Vec::with_capacity(m);
        for _ in 0..m {
            let mut ell: Vec<f64> = (0..levels - 1).map(|_| r.random_range(0.05..3.0)).collect();
            ell.sort_by(|a, b| b.total_cmp(a));
            let mut row_r = vec![r.random_range(0.0..1.0)];
            let mut row_c = vec![r.random_range(0.0..1.0)];
            for l in ell {
                let dc = r.random_range(0.1..2.0);
                row_r.push(row_r[row_r.len() - 1] + l * dc);
                row_c.push(row_c[row_c.len() - 1] + dc);
            }
            rs.push(row_r);
            cs.push(row_c);
        }
        let inst = MultiTreatmentInstance::new(rs, cs).expect("valid instance");
        if compute_marginals(&inst).expect("marginals").all_monotone() {
            return inst;
        }
    }
}

pub fn comparison_rule_equivalence() -> CriterionResult {
    timed(6, "comparison rule equivalence", || {
        let start = Instant::now();
        let mut r = rng(4);
        let mut mismatched_choices = 0;
        let mut mismatched_solutions = 0;
        for _ in 0..200 {
            let m = r.random_range(1..=50);
            let levels = r.random_range(2..=6);
            let inst = random_monotone(&mut r, m, levels);
            let table = compute_marginals(&inst).expect("marginals");
            let top = table.max_value();
            for step in 0..=64 {
                let alpha = top * step as f64 / 64.0 * 1.01;
                if algorithm2_choice(&table, alpha) != lagrangian_choice(&inst, alpha) {
                    mismatched_choices += 1;
                }
            }
            let budget = inst.base_cost() + r.random_range(0.0..1.0) * (inst.top_cost() - inst.base_cost());
            let a = lagrangian_mtbap(&inst, budget, 1e-6).expect("lagrangian");
            let b = algorithm2_mtbap(&table, &inst, budget, 1e-6).expect("comparison rule");
            if a.allocation.chosen != b.allocation.chosen || a.allocation.consumed_cost != b.allocation.consumed_cost {
                mismatched_solutions += 1;
            }
        }
        let secs = start.elapsed().as_secs_f64();
        (
            mismatched_choices == 0 && mismatched_solutions == 0 && secs < 30.0,
            format!(
                "200 instances x 65 multipliers: {mismatched_choices} differing choices, {mismatched_solutions} differing solutions; {secs:.2}s (< 30s)"
            ),
        )
    })
}

pub fn greedy_and_dual_bounds() -> CriterionResult {
    timed(7, "greedy and dual gap bounds", || {
        let mut r = rng(1);
        let mut greedy_violations = 0;
        let mut tightest = f64::INFINITY;
        for _ in 0..100 {
            let n = r.random_range(1..=20);
            let tau_r: Vec<f64> = (0..n).map(|_| r.random_range(0.01..5.0)).collect();
            let tau_c: Vec<f64> = (0..n).map(|_| r.random_range(0.1..3.0)).collect();
            let budget = tau_c.iter().sum::<f64>() * r.random_range(0.05..0.95);
            let greedy = greedy_btap(&tau_r, &tau_c, budget).expect("greedy");
            let opt = knapsack_oracle(&tau_r, &tau_c, budget).expect("oracle");
            let max_r = tau_r.iter().copied().fold(0.0, f64::max);
            // (1 − max τ^r/OPT)·OPT = OPT − max τ^r.
            let slack = greedy.objective - (opt.objective - max_r);
            tightest = tightest.min(slack);
            if slack < -1e-9 || greedy.consumed_cost > budget {
                greedy_violations += 1;
            }
        }
        let mut gap_violations = 0;
        let mut worst_ratio: f64 = 0.0;
        let mut r = rng(5);
        for _ in 0..100 {
            let m = r.random_range(1..=8);
            let levels = r.random_range(2..=4);
            let inst = random_monotone(&mut r, m, levels);
            let budget = inst.base_cost() + r.random_range(0.0..1.0) * (inst.top_cost() - inst.base_cost());
            let sol = lagrangian_mtbap(&inst, budget, 1e-9).expect("lagrangian");
            let opt = mckp_oracle(&inst, budget).expect("mckp oracle");
            let gap = opt.objective - sol.allocation.objective;
            let span = inst.max_reward_span();
            worst_ratio = worst_ratio.max(gap / span);
            if gap > span + 1e-9 {
                gap_violations += 1;
            }
        }
        (
            greedy_violations == 0 && gap_violations == 0,
            format!(
                "greedy bound violated {greedy_violations}/100 (min slack {tightest:.3}); dual gap over span bound {gap_violations}/100 (max gap/span {worst_ratio:.3})"
            ),
        )
    })
}

fn flat(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().flatten().copied().collect()
}

pub fn metric_sanity() -> CriterionResult {
    timed(8, "metric sanity", || {
        let metric =
            |ds: &RctDataset, s: &[f64]| mt_aucc(&mt_cost_curve(&build_quintuples(ds, s).expect("quintuples")).expect("curve")).expect("metric");

        let (ds, _) = gen_mtbap_dataset(&SynthConfig::new(10_000, 4, 3, 0.5, 1)).expect("synthetic data");
        let mut r = rng(2);
        let mut scores: Vec<f64> = (0..ds.len() * 2).map(|i| i as f64).collect();
        let random: Vec<f64> = (0..200)
            .map(|_| {
                scores.shuffle(&mut r);
                metric(&ds, &scores)
            })
            .collect();
        let random_mean = mean(&random);
        let random_ok = (random_mean - 0.5).abs() <= 0.02;

        let (ds, truth) = gen_mtbap_dataset(&SynthConfig::new(20_000, 4, 3, 0.5, 8)).expect("synthetic data");
        let oracle = metric(&ds, &flat(&truth.marginal));
        let cfg = TrainConfig {
            learning_rate: 1.0,
            epochs: 200,
            ..TrainConfig::default()
        };
        let (model, _) = train(Scorer::linear(4, Arity::PerLevel, 3).expect("scorer"), &ds, LossKind::Dpm, &cfg)
            .expect("training");
        let dpm = metric(&ds, &predict_decision_factor(&model, ds.samples(), LossKind::Dpm).expect("predict").values);
        let base = TwoPhaseModel::fit(&ds, 1e-6).expect("two-phase fit");
        let (rh, ch) = base.predict(ds.samples()).expect("two-phase predict");
        let two_phase_ell = compute_marginals(&MultiTreatmentInstance::new(rh, ch).expect("instance")).expect("marginals");
        let two_phase = metric(&ds, &flat(&two_phase_ell.ell));
        let noise: Vec<f64> = (0..ds.len() * 2).map(|_| r.random()).collect();
        let rand_model = metric(&ds, &noise);
        let oracle_ok = oracle > dpm && oracle > two_phase && oracle > rand_model;

        let warped: Vec<f64> = flat(&truth.marginal).iter().map(|s| (4.0 * s).exp() - 2.0).collect();
        let mut invariant = metric(&ds, &flat(&truth.marginal)) == metric(&ds, &warped);
        let (bin, bt) = gen_btap_dataset(&SynthConfig::new(3_000, 3, 2, 0.3, 4)).expect("synthetic data");
        let roi = bt.roi();
        let roi_warped: Vec<f64> = roi.iter().map(|v| v.powi(3) + 1.0).collect();
        invariant &= aucc(&bin, &roi).expect("aucc") == aucc(&bin, &roi_warped).expect("aucc");
        let cate_warped: Vec<f64> = bt.cate_r.iter().map(|v| v.ln()).collect();
        invariant &= auuc(&bin, &bt.cate_r).expect("auuc") == auuc(&bin, &cate_warped).expect("auuc");

        (
            random_ok && oracle_ok && invariant,
            format!(
                "random mean {random_mean:.4} (0.50 +- 0.02); oracle {oracle:.4} > dpm {dpm:.4}, two-phase {two_phase:.4}, random {rand_model:.4}; transform-invariant: {invariant}"
            ),
        )
    })
}

/// `E[max(μ + σZ, 0)]`: the generator clips noisy outcomes at zero.
fn clipped_mean(mu: f64, sigma: f64) -> f64 {
    use statrs::distribution::{Continuous, ContinuousCDF, Normal};
    let z = Normal::standard();
    mu * z.cdf(mu / sigma) + sigma * z.pdf(mu / sigma)
}

pub fn eom_unbiasedness() -> CriterionResult {
    timed(9, "eom unbiasedness", || {
        let n = 2_000;
        let noise = 0.5;
        let policy = PolicyTable {
            levels: (0..n).map(|i| usize::from(i < n / 2)).collect(),
        };
        let diffs: Vec<f64> = (0..50u64)
            .into_par_iter()
            .map(|seed| {
                let (ds, truth) =
                    gen_btap_dataset(&SynthConfig::new(n, 3, 2, noise, 100 + seed)).expect("synthetic data");
                let estimate = eom(&ds, &policy).expect("eom").0;
                let value: f64 = policy
                    .levels
                    .iter()
                    .enumerate()
                    .map(|(i, &l)| clipped_mean(truth.response_r[i][l], noise))
                    .sum::<f64>();
                estimate - value / n as f64
            })
            .collect();
        let (bias, se) = (mean(&diffs), std_error(&diffs));
        (
            bias.abs() <= 3.0 * se,
            format!("mean EOM - true value = {bias:.5}, 3 x s.e. = {:.5}, 50 seeds", 3.0 * se),
        )
    })
}

/// Settings of the end-to-end sweep.
pub const SWEEP_SEEDS: u64 = 10;
pub const SWEEP_N: usize = 100_000;
pub const SWEEP_LEVELS: usize = 4;
/// Budgets as shares of the predicted cost of moving everyone from the
/// lowest to the highest level.
pub const SWEEP_FRACTIONS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

pub fn sweep_train_cfg() -> TrainConfig {
    TrainConfig {
        learning_rate: 5.0,
        epochs: 300,
        ..TrainConfig::default()
    }
}

/// Held-out EOM reward per budget for `(DPM + comparison rule, two-phase)`.
pub fn sweep_pair(seed: u64) -> (Vec<f64>, Vec<f64>) {
    let (ds, _) =
        gen_mtbap_dataset(&SynthConfig::new(SWEEP_N, 4, SWEEP_LEVELS, 0.5, seed)).expect("synthetic data");
    let (train_ds, test) = ds.split(0.3, derive_seed(seed, 2)).expect("split");
    let (model, _) = train(
        Scorer::linear(4, Arity::PerLevel, SWEEP_LEVELS).expect("scorer"),
        &train_ds,
        LossKind::Dpm,
        &sweep_train_cfg(),
    )
    .expect("training");
    let est = predict_decision_factor(&model, test.samples(), LossKind::Dpm).expect("predict");
    let base = TwoPhaseModel::fit(&train_ds, 1e-6).expect("two-phase fit");
    let (reward_hat, cost_hat) = base.predict(test.samples()).expect("two-phase predict");
    let span: f64 = cost_hat.iter().map(|c| c[SWEEP_LEVELS - 1] - c[0]).sum();
    let budgets: Vec<f64> = SWEEP_FRACTIONS.iter().map(|f| f * span).collect();
    let rewards = |planner: Planner| -> Vec<f64> {
        budget_sweep(&test, &cost_hat, &planner, &budgets, 1e-6)
            .expect("sweep")
            .points
            .iter()
            .map(|p| p.eom_reward)
            .collect()
    };
    (
        rewards(Planner::Marginal { ell: est.rows() }),
        rewards(Planner::Response { reward: reward_hat }),
    )
}

pub fn end_to_end_ordering() -> CriterionResult {
    timed(10, "end-to-end eom ordering", || {
        let start = Instant::now();
        let runs: Vec<(Vec<f64>, Vec<f64>)> = (0..SWEEP_SEEDS).into_par_iter().map(sweep_pair).collect();
        let secs = start.elapsed().as_secs_f64();
        let mut all_ahead = true;
        let mut significant = 0;
        let mut cells = Vec::new();
        for k in 0..SWEEP_FRACTIONS.len() {
            let dpm: Vec<f64> = runs.iter().map(|r| r.0[k]).collect();
            let two: Vec<f64> = runs.iter().map(|r| r.1[k]).collect();
            let t = paired_t_test_greater(&dpm, &two);
            all_ahead &= mean(&dpm) >= mean(&two);
            if t.p_value < 0.05 {
                significant += 1;
            }
            cells.push(format!("{:+.4} (p {:.3})", t.mean_diff, t.p_value));
        }
        (
            all_ahead && significant >= 3 && secs < 300.0,
            format!(
                "dpm - two-phase per budget: {}; {significant}/5 significant (need 3), {secs:.0}s (< 300s)",
                cells.join(", ")
            ),
        )
    })
}
