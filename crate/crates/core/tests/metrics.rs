mod common;

use common::rng;
use decision_factor::eval::{
    aucc, auuc, binary_quintuples, budget_sweep, build_quintuples, eom, mt_aucc, mt_cost_curve, uplift_curve,
    Planner, PolicyTable,
};
use decision_factor::learn::{predict_decision_factor, train, Arity, LossKind, Scorer, TrainConfig, TwoPhaseModel};
use decision_factor::stats::{mean, std_error};
use decision_factor::synth::{gen_btap_dataset, gen_mtbap_dataset, SynthConfig};
use rand::seq::SliceRandom;
use rand::Rng;

fn flat(rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter().flatten().copied().collect()
}

#[test]
fn random_scores_average_one_half() {
    let (ds, _) = gen_mtbap_dataset(&SynthConfig::new(10_000, 4, 3, 0.5, 1)).unwrap();
    let mut r = rng(2);
    let mut scores: Vec<f64> = (0..ds.len() * 2).map(|i| i as f64).collect();
    let values: Vec<f64> = (0..200)
        .map(|_| {
            scores.shuffle(&mut r);
            mt_aucc(&mt_cost_curve(&build_quintuples(&ds, &scores).unwrap()).unwrap()).unwrap()
        })
        .collect();
    let m = mean(&values);
    assert!((m - 0.5).abs() <= 0.02, "mean MT-AUCC of random scores {m}");
}

#[test]
fn curve_metrics_ignore_monotone_rescoring() {
    let (ds, truth) = gen_mtbap_dataset(&SynthConfig::new(3_000, 3, 3, 0.3, 3)).unwrap();
    let scores = flat(&truth.marginal);
    let warped: Vec<f64> = scores.iter().map(|s| (4.0 * s).exp() - 2.0).collect();
    let a = mt_cost_curve(&build_quintuples(&ds, &scores).unwrap()).unwrap();
    let b = mt_cost_curve(&build_quintuples(&ds, &warped).unwrap()).unwrap();
    assert_eq!(a.points, b.points);
    assert_eq!(mt_aucc(&a).unwrap(), mt_aucc(&b).unwrap());

    let (bin, bt) = gen_btap_dataset(&SynthConfig::new(3_000, 3, 2, 0.3, 4)).unwrap();
    let roi: Vec<f64> = bt.cate_r.iter().zip(&bt.cate_c).map(|(r, c)| r / c).collect();
    let roi_warped: Vec<f64> = roi.iter().map(|v| v.powi(3) + 1.0).collect();
    assert_eq!(aucc(&bin, &roi).unwrap(), aucc(&bin, &roi_warped).unwrap());
    let cate_warped: Vec<f64> = bt.cate_r.iter().map(|v| v.ln()).collect();
    assert_eq!(auuc(&bin, &bt.cate_r).unwrap(), auuc(&bin, &cate_warped).unwrap());
}

#[test]
fn binary_cost_metric_is_the_two_level_special_case() {
    for seed in 0..5 {
        let (ds, truth) = gen_btap_dataset(&SynthConfig::new(2_000, 3, 2, 0.4, seed)).unwrap();
        let roi: Vec<f64> = truth.cate_r.iter().zip(&truth.cate_c).map(|(r, c)| r / c).collect();
        let mt = mt_aucc(&mt_cost_curve(&build_quintuples(&ds, &roi).unwrap()).unwrap()).unwrap();
        assert!((aucc(&ds, &roi).unwrap() - mt).abs() <= 1e-12);
    }
}

#[test]
fn endpoint_matches_weighted_group_means() {
    let (ds, _) = gen_btap_dataset(&SynthConfig::new(1_000, 2, 2, 0.4, 5)).unwrap();
    let scores: Vec<f64> = (0..ds.len()).map(|i| (i * 7919 % 1000) as f64).collect();
    let curve = mt_cost_curve(&binary_quintuples(&ds, &scores).unwrap()).unwrap();
    let mut sums = [[0.0; 2]; 2];
    for s in ds.samples() {
        sums[s.treatment][0] += s.cost;
        sums[s.treatment][1] += s.reward;
    }
    let n = ds.counts();
    let w = [ds.total() as f64 / n[0] as f64, ds.total() as f64 / n[1] as f64];
    let dc = w[1] * sums[1][0] / n[1] as f64 - w[0] * sums[0][0] / n[0] as f64;
    let dr = w[1] * sums[1][1] / n[1] as f64 - w[0] * sums[0][1] / n[0] as f64;
    assert!((curve.endpoint.0 - dc).abs() < 1e-9 && (curve.endpoint.1 - dr).abs() < 1e-9);
}

#[test]
fn oracle_uplift_ranking_beats_learned_and_random() {
    let (ds, truth) = gen_btap_dataset(&SynthConfig::new(20_000, 4, 2, 0.5, 6)).unwrap();
    let oracle = auuc(&ds, &truth.cate_r).unwrap();
    let reversed: Vec<f64> = truth.cate_r.iter().map(|v| -v).collect();
    let cfg = TrainConfig {
        learning_rate: 1.0,
        epochs: 200,
        ..TrainConfig::default()
    };
    let (model, _) = train(Scorer::linear(4, Arity::Single, 2).unwrap(), &ds, LossKind::Dum, &cfg).unwrap();
    let learned = auuc(&ds, &predict_decision_factor(&model, ds.samples(), LossKind::Dum).unwrap().scores).unwrap();
    let mut r = rng(7);
    let random: Vec<f64> = (0..ds.len()).map(|_| r.random()).collect();
    let random = auuc(&ds, &random).unwrap();
    assert!(oracle > learned && oracle > random);
    assert!(auuc(&ds, &reversed).unwrap() < 0.5);
    let curve = uplift_curve(&binary_quintuples(&ds, &truth.cate_r).unwrap()).unwrap();
    assert!(curve.area_model > curve.area_random);
}

#[test]
fn oracle_marginal_ranking_beats_learned_and_random() {
    let (ds, truth) = gen_mtbap_dataset(&SynthConfig::new(20_000, 4, 3, 0.5, 8)).unwrap();
    let metric = |s: &[f64]| mt_aucc(&mt_cost_curve(&build_quintuples(&ds, s).unwrap()).unwrap()).unwrap();
    let oracle = metric(&flat(&truth.marginal));
    let cfg = TrainConfig {
        learning_rate: 1.0,
        epochs: 200,
        ..TrainConfig::default()
    };
    let (model, _) = train(Scorer::linear(4, Arity::PerLevel, 3).unwrap(), &ds, LossKind::Dpm, &cfg).unwrap();
    let learned = metric(&predict_decision_factor(&model, ds.samples(), LossKind::Dpm).unwrap().values);
    let mut r = rng(9);
    let random: Vec<f64> = (0..ds.len() * 2).map(|_| r.random()).collect();
    let random = metric(&random);
    assert!(oracle > learned && oracle > random);
}

/// `E[max(μ + σZ, 0)]`, the mean of a clipped Gaussian observation.
fn clipped_mean(mu: f64, sigma: f64) -> f64 {
    use statrs::distribution::{Continuous, ContinuousCDF, Normal};
    let z = Normal::new(0.0, 1.0).unwrap();
    mu * z.cdf(mu / sigma) + sigma * z.pdf(mu / sigma)
}

#[test]
fn policy_value_is_unbiased() {
    // Fixed policy: level 1 for the first half of the population, 0 otherwise.
    let n = 2_000;
    let policy = PolicyTable {
        levels: (0..n).map(|i| usize::from(i < n / 2)).collect(),
    };
    let mut estimates = Vec::new();
    let mut truths = Vec::new();
    for seed in 0..50 {
        let (ds, truth) = gen_btap_dataset(&SynthConfig::new(n, 3, 2, 0.5, 100 + seed)).unwrap();
        estimates.push(eom(&ds, &policy).unwrap().0);
        let value: f64 = policy
            .levels
            .iter()
            .enumerate()
            .map(|(i, &l)| clipped_mean(truth.response_r[i][l], 0.5))
            .sum::<f64>();
        truths.push(value / n as f64);
    }
    let diffs: Vec<f64> = estimates.iter().zip(&truths).map(|(a, b)| a - b).collect();
    assert!(mean(&diffs).abs() <= 3.0 * std_error(&diffs));
}

#[test]
fn sweep_spends_more_as_budget_grows() {
    let (ds, truth) = gen_mtbap_dataset(&SynthConfig::new(4_000, 3, 3, 0.2, 10)).unwrap();
    let baseline = TwoPhaseModel::fit(&ds, 1e-6).unwrap();
    let (reward, costs) = baseline.predict(ds.samples()).unwrap();
    let span: f64 = costs.iter().map(|c| c[2] - c[0]).sum();
    // The last budget clears the full span despite summation rounding.
    let budgets: Vec<f64> = (0..=5).map(|k| span * k as f64 / 5.0 * 1.000_001).collect();
    for planner in [
        Planner::Marginal {
            ell: truth.marginal.clone(),
        },
        Planner::Response { reward },
        Planner::Random { seed: 3 },
    ] {
        let res = budget_sweep(&ds, &costs, &planner, &budgets, 1e-6).unwrap();
        assert!(res.points[0].levels.iter().all(|&l| l == 0));
        // Positive utilities fill the whole span; a fitted response surface
        // may predict that some upgrades lose reward and skip them.
        if !matches!(planner, Planner::Response { .. }) {
            assert!(res.points[5].levels.iter().all(|&l| l == 2));
        }
        assert!(res.points.iter().all(|p| p.planned_cost <= p.budget + 1e-9));
        let null = eom(&ds, &PolicyTable::constant(ds.len(), 0)).unwrap().0;
        assert_eq!(res.points[0].eom_reward, null);
        assert!(res.points.windows(2).all(|w| w[1].planned_cost >= w[0].planned_cost));
    }
}
