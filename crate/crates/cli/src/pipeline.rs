//! Data → train → predict → allocate → evaluate, with every random choice
//! drawn from a stage seed derived from the experiment seed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use decision_factor::eval::{
    binary_quintuples, budget_sweep, build_quintuples, eom, mt_aucc, mt_cost_curve, uplift_curve, CostCurve,
    Planner, PolicyTable, SweepResult,
};
use decision_factor::learn::{
    predict_decision_factor, train, Estimates, Model, Scorer, ScorerKind, TrainReport, TwoPhaseModel,
};
use decision_factor::solve::greedy_by_score;
use decision_factor::synth::{gen_mtbap_dataset, GroundTruth};
use decision_factor::{derive_seed, ingest_csv, RctDataset};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{DatasetSource, ExperimentConfig, MetricKind, SolverChoice};
use crate::error::{AtStage, PipelineError, Stage};

/// Sub-stream labels fed to [`derive_seed`].
pub const SEED_SYNTH: u64 = 1;
pub const SEED_SPLIT: u64 = 2;
pub const SEED_TRAIN: u64 = 3;
pub const SEED_RANDOM_PLANNER: u64 = 4;

/// Planner name used for the random-utility comparison in sweeps.
pub const RANDOM_PLANNER: &str = "random";
/// Planner name of the two-phase comparison in sweeps.
pub const TWO_PHASE_PLANNER: &str = "two_phase";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub n_train: usize,
    pub n_test: usize,
    pub n_levels: usize,
    pub feature_dim: usize,
    pub train_counts: Vec<usize>,
    pub test_counts: Vec<usize>,
}

/// One number with the operation that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub name: String,
    pub operation: String,
    pub params: BTreeMap<String, String>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRecord {
    pub metric: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

/// Outcome of one planner at one budget, scored on the held-out split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRecord {
    pub planner: String,
    pub budget: f64,
    pub infeasible: bool,
    pub planned_cost: Option<f64>,
    pub eom_reward: Option<f64>,
    pub eom_cost: Option<f64>,
    pub alpha_star: Option<f64>,
    pub iterations: usize,
    /// Rows whose predicted utilities were isotonically repaired.
    pub repaired_rows: usize,
    /// Individuals per level.
    pub level_counts: Vec<usize>,
    pub levels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    /// Hex SHA-256 over git-style blobs of the config and any input file.
    pub input_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub data: DataSummary,
    pub training: TrainReport,
    pub model: Model,
    pub metrics: Vec<MetricRecord>,
    pub curves: Vec<CurveRecord>,
    pub allocations: Vec<AllocationRecord>,
    /// Seconds per stage. The only field that varies between identical runs.
    pub timings: BTreeMap<String, f64>,
}

/// How far the pipeline goes and what it adds beyond the configured solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub allocate: bool,
    pub evaluate: bool,
    /// Also run the two-phase and random planners at every budget.
    pub baselines: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            allocate: true,
            evaluate: true,
            baselines: false,
        }
    }
}

/// Loads or generates the full dataset; the ground truth is known only for
/// synthetic sources.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(RctDataset, Option<GroundTruth>), PipelineError> {
    match &cfg.dataset {
        DatasetSource::Synth(s) => {
            let mut s = s.clone();
            s.seed = derive_seed(cfg.seed, SEED_SYNTH);
            let (ds, truth) = gen_mtbap_dataset(&s).at(Stage::Data)?;
            Ok((ds, Some(truth)))
        }
        DatasetSource::Csv { path, schema } => Ok((ingest_csv(path, schema).at(Stage::Data)?, None)),
    }
}

fn blob(hasher: &mut Sha256, bytes: &[u8]) {
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
}

/// Content hash of everything that determines the run's numbers. The
/// output directory is left out since it does not.
pub fn input_hash(cfg: &ExperimentConfig) -> Result<String, PipelineError> {
    let mut echo = cfg.clone();
    echo.out_dir = Default::default();
    let mut hasher = Sha256::new();
    blob(&mut hasher, &serde_json::to_vec(&echo).map_err(|e| PipelineError::new(Stage::Config, e.into()))?);
    if let DatasetSource::Csv { path, .. } = &cfg.dataset {
        let bytes = std::fs::read(path).map_err(|e| PipelineError::io(Stage::Data, path, e))?;
        blob(&mut hasher, &bytes);
    }
    let digest = hasher.finalize();
    Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

fn build_scorer(cfg: &ExperimentConfig, train_ds: &RctDataset) -> decision_factor::Result<Scorer> {
    let arity = cfg.loss.arity();
    match cfg.scorer {
        ScorerKind::Linear => Scorer::linear(train_ds.feature_dim(), arity, train_ds.n_levels()),
        ScorerKind::Tabular => Scorer::tabular(train_ds.samples(), arity, train_ds.n_levels()),
    }
}

fn level_counts(levels: &[usize], n_levels: usize) -> Vec<usize> {
    let mut counts = vec![0; n_levels];
    for &l in levels {
        counts[l] += 1;
    }
    counts
}

fn sweep_records(name: &str, sweep: SweepResult, n_levels: usize) -> Vec<AllocationRecord> {
    sweep
        .points
        .into_iter()
        .map(|p| {
            let ok = !p.infeasible;
            AllocationRecord {
                planner: name.to_string(),
                budget: p.budget,
                infeasible: p.infeasible,
                planned_cost: ok.then_some(p.planned_cost),
                eom_reward: ok.then_some(p.eom_reward),
                eom_cost: ok.then_some(p.eom_cost),
                alpha_star: ok.then_some(p.alpha_star),
                iterations: p.iterations,
                repaired_rows: sweep.repaired_rows,
                level_counts: level_counts(&p.levels, n_levels),
                levels: p.levels,
            }
        })
        .collect()
}

fn greedy_records(
    test: &RctDataset,
    est: &Estimates,
    costs: &[Vec<f64>],
    budgets: &[f64],
) -> decision_factor::Result<Vec<AllocationRecord>> {
    let tau_c: Vec<f64> = costs.iter().map(|c| c[1] - c[0]).collect();
    let mut out = Vec::with_capacity(budgets.len());
    for &b in budgets {
        let take = greedy_by_score(&est.values, &tau_c, b)?;
        let levels: Vec<usize> = take.iter().map(|&t| usize::from(t)).collect();
        let planned: f64 = take.iter().zip(&tau_c).filter(|(t, _)| **t).map(|(_, c)| c).sum();
        let (reward, cost) = eom(test, &PolicyTable { levels: levels.clone() })?;
        out.push(AllocationRecord {
            planner: SolverChoice::Greedy.name().into(),
            budget: b,
            infeasible: false,
            planned_cost: Some(planned),
            eom_reward: Some(reward),
            eom_cost: Some(cost),
            alpha_star: None,
            iterations: 0,
            repaired_rows: 0,
            level_counts: level_counts(&levels, 2),
            levels,
        });
    }
    Ok(out)
}

fn params(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn curve_record(metric: MetricKind, curve: &CostCurve, x_label: &str) -> CurveRecord {
    CurveRecord {
        metric: metric.name().into(),
        x_label: x_label.into(),
        y_label: "delta_reward".into(),
        points: curve.points.clone(),
    }
}

/// Runs every stage the config asks for.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, PipelineError> {
    run_with(cfg, RunOptions::default())
}

pub fn run_with(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunReport, PipelineError> {
    cfg.validate()?;
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |timings: &mut BTreeMap<String, f64>, stage: Stage| {
        timings.insert(stage.name().to_string(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };

    let seeds: BTreeMap<String, u64> = [
        ("synth", SEED_SYNTH),
        ("split", SEED_SPLIT),
        ("train", SEED_TRAIN),
        ("random_planner", SEED_RANDOM_PLANNER),
    ]
    .into_iter()
    .map(|(k, s)| (k.to_string(), derive_seed(cfg.seed, s)))
    .collect();

    let input_hash = input_hash(cfg)?;
    let (full, _) = load_data(cfg)?;
    cfg.check_levels(full.n_levels())?;
    let (train_ds, test) = full.split(cfg.test_fraction, seeds["split"]).at(Stage::Data)?;
    // With no held-out share, allocation and metrics run on the training data.
    let test = if test.is_empty() { train_ds.clone() } else { test };
    let n_levels = full.n_levels();
    let data = DataSummary {
        n_train: train_ds.len(),
        n_test: test.len(),
        n_levels,
        feature_dim: full.feature_dim(),
        train_counts: train_ds.counts().to_vec(),
        test_counts: test.counts().to_vec(),
    };
    lap(&mut timings, Stage::Data);

    let scorer = build_scorer(cfg, &train_ds).at(Stage::Train)?;
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = seeds["train"];
    let (model, training) = train(scorer, &train_ds, cfg.loss, &train_cfg).at(Stage::Train)?;
    lap(&mut timings, Stage::Train);

    let est = predict_decision_factor(&model, test.samples(), cfg.loss).at(Stage::Predict)?;
    lap(&mut timings, Stage::Predict);

    let mut allocations = Vec::new();
    if opts.allocate && !cfg.budgets.is_empty() {
        let baseline = TwoPhaseModel::fit(&train_ds, cfg.ridge).at(Stage::Allocate)?;
        let (reward_hat, cost_hat) = baseline.predict(test.samples()).at(Stage::Allocate)?;
        let sweep = |planner: &Planner| budget_sweep(&test, &cost_hat, planner, &cfg.budgets, cfg.epsilon);
        match cfg.solver {
            SolverChoice::Greedy => {
                allocations.extend(greedy_records(&test, &est, &cost_hat, &cfg.budgets).at(Stage::Allocate)?)
            }
            SolverChoice::Algorithm2 => {
                let res = sweep(&Planner::Marginal { ell: est.rows() }).at(Stage::Allocate)?;
                allocations.extend(sweep_records(SolverChoice::Algorithm2.name(), res, n_levels));
            }
            SolverChoice::Lagrangian => {
                let res = sweep(&Planner::Response {
                    reward: reward_hat.clone(),
                })
                .at(Stage::Allocate)?;
                allocations.extend(sweep_records(SolverChoice::Lagrangian.name(), res, n_levels));
            }
        }
        if opts.baselines {
            if cfg.solver != SolverChoice::Lagrangian {
                let res = sweep(&Planner::Response { reward: reward_hat }).at(Stage::Allocate)?;
                allocations.extend(sweep_records(TWO_PHASE_PLANNER, res, n_levels));
            }
            let res = sweep(&Planner::Random {
                seed: seeds["random_planner"],
            })
            .at(Stage::Allocate)?;
            allocations.extend(sweep_records(RANDOM_PLANNER, res, n_levels));
        }
        lap(&mut timings, Stage::Allocate);
    }

    let mut metrics = Vec::new();
    let mut curves = Vec::new();
    if opts.evaluate {
        let scores = format!("{} decision factor", cfg.loss.name());
        for &m in &cfg.metrics {
            match m {
                MetricKind::Auuc | MetricKind::Aucc | MetricKind::MtAucc => {
                    let (curve, operation, x_label) = match m {
                        MetricKind::Auuc => (
                            uplift_curve(&binary_quintuples(&test, &est.values).at(Stage::Evaluate)?),
                            "uplift curve area / (2 x chord area), binary quintuples",
                            "fraction_targeted",
                        ),
                        MetricKind::Aucc => (
                            mt_cost_curve(&binary_quintuples(&test, &est.values).at(Stage::Evaluate)?),
                            "cost curve area / (2 x chord area), binary quintuples",
                            "delta_cost",
                        ),
                        _ => (
                            mt_cost_curve(&build_quintuples(&test, &est.values).at(Stage::Evaluate)?),
                            "cost curve area / (2 x chord area), multi-treatment quintuples",
                            "delta_cost",
                        ),
                    };
                    let curve = curve.at(Stage::Evaluate)?;
                    metrics.push(MetricRecord {
                        name: m.name().into(),
                        operation: operation.into(),
                        params: params(&[
                            ("scores", scores.clone()),
                            ("split", "test".into()),
                            ("points", curve.len().to_string()),
                        ]),
                        value: mt_aucc(&curve).at(Stage::Evaluate)?,
                    });
                    curves.push(curve_record(m, &curve, x_label));
                }
                MetricKind::Eom => {
                    let own = cfg.solver.name();
                    let mut points = Vec::new();
                    for a in allocations.iter().filter(|a| a.planner == own) {
                        let (Some(reward), Some(cost)) = (a.eom_reward, a.eom_cost) else { continue };
                        points.push((a.budget, reward));
                        for (name, value) in [("eom_reward", reward), ("eom_cost", cost)] {
                            metrics.push(MetricRecord {
                                name: name.into(),
                                operation: "inverse-propensity policy value per individual".into(),
                                params: params(&[
                                    ("planner", own.into()),
                                    ("budget", a.budget.to_string()),
                                    ("epsilon", cfg.epsilon.to_string()),
                                    ("split", "test".into()),
                                ]),
                                value,
                            });
                        }
                    }
                    curves.push(CurveRecord {
                        metric: m.name().into(),
                        x_label: "budget".into(),
                        y_label: "eom_reward".into(),
                        points,
                    });
                }
            }
        }
        lap(&mut timings, Stage::Evaluate);
    }

    Ok(RunReport {
        config: cfg.clone(),
        input_hash,
        seeds,
        data,
        training,
        model,
        metrics,
        curves,
        allocations,
        timings,
    })
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    std::fs::write(path, text).map_err(|e| PipelineError::io(Stage::Emit, path, e))
}

fn pretty<T: Serialize>(value: &T) -> Result<String, PipelineError> {
    serde_json::to_string_pretty(value).map_err(|e| PipelineError::new(Stage::Emit, e.into()))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes `report.json` and `model.json`; with metrics, also `metrics.csv`
/// and `curve_<metric>.csv` per curve; with allocations, `allocation.csv`
/// (one column of levels per budget of the configured solver).
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<Vec<std::path::PathBuf>, PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(Stage::Emit, dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, text: String| -> Result<(), PipelineError> {
        let path = dir.join(name);
        write(&path, &text)?;
        written.push(path);
        Ok(())
    };
    put("report.json", pretty(report)?)?;
    put("model.json", pretty(&report.model)?)?;

    if !report.metrics.is_empty() {
        let mut text = String::from("name,operation,params,value\n");
        for m in &report.metrics {
            let p: Vec<String> = m.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let _ = writeln!(
                text,
                "{},{},{},{}",
                csv_field(&m.name),
                csv_field(&m.operation),
                csv_field(&p.join(";")),
                m.value
            );
        }
        put("metrics.csv", text)?;
    }
    for c in &report.curves {
        let mut text = format!("{},{}\n", c.x_label, c.y_label);
        for (x, y) in &c.points {
            let _ = writeln!(text, "{x},{y}");
        }
        put(&format!("curve_{}.csv", c.metric), text)?;
    }

    let own: Vec<&AllocationRecord> = report
        .allocations
        .iter()
        .filter(|a| a.planner == report.config.solver.name() && !a.infeasible)
        .collect();
    if !own.is_empty() {
        let mut text = String::from("row");
        for (k, _) in own.iter().enumerate() {
            let _ = write!(text, ",budget_{k}");
        }
        text.push('\n');
        for i in 0..own[0].levels.len() {
            let _ = write!(text, "{i}");
            for a in &own {
                let _ = write!(text, ",{}", a.levels[i]);
            }
            text.push('\n');
        }
        put("allocation.csv", text)?;
    }
    Ok(written)
}

/// Reads a `report.json` written by [`emit_report`].
pub fn load_report(path: &Path) -> Result<RunReport, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(Stage::Emit, path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::new(Stage::Emit, e.into()))
}
