use std::path::Path;
use std::time::Instant;

use decision_factor::learn::{LossKind, TrainConfig};
use decision_factor::synth::{gen_mtbap_dataset, SynthConfig};
use decision_factor::SchemaConfig;
use dfactor::pipeline::input_hash;
use dfactor::{
    emit_report, load_report, run_experiment, DatasetSource, ExperimentConfig, MetricKind, SolverChoice, Stage,
};

fn small(levels: usize, loss: LossKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(DatasetSource::Synth(SynthConfig::new(3_000, 3, levels, 0.3, 0)), loss);
    cfg.train = TrainConfig {
        learning_rate: 1.0,
        epochs: 30,
        ..TrainConfig::default()
    };
    cfg.seed = 11;
    cfg
}

fn file_names(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn identical_configs_give_identical_reports() {
    let mut cfg = small(3, LossKind::Dpm);
    cfg.budgets = vec![50.0, 150.0];
    cfg.metrics = vec![MetricKind::MtAucc, MetricKind::Eom];
    let mut a = run_experiment(&cfg).unwrap();
    let mut b = run_experiment(&cfg).unwrap();
    a.timings.clear();
    b.timings.clear();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

    cfg.seed = 12;
    let c = run_experiment(&cfg).unwrap();
    assert_ne!(a.input_hash, c.input_hash);
    assert_ne!(a.model, c.model);
}

#[test]
fn output_directory_does_not_change_the_hash() {
    let mut cfg = small(2, LossKind::Drp);
    let h = input_hash(&cfg).unwrap();
    cfg.out_dir = "elsewhere".into();
    assert_eq!(input_hash(&cfg).unwrap(), h);
    assert_eq!(h.len(), 64);
}

#[test]
fn uplift_loss_with_three_levels_is_rejected_up_front() {
    let err = run_experiment(&small(3, LossKind::Dum)).unwrap_err();
    assert_eq!(err.stage, Stage::Config);
    assert!(err.to_string().contains("two treatment levels"), "{err}");
}

#[test]
fn empty_metric_list_writes_report_and_model_only() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&small(2, LossKind::Drp)).unwrap();
    emit_report(&report, dir.path()).unwrap();
    assert_eq!(file_names(dir.path()), vec!["model.json", "report.json"]);
}

#[test]
fn full_run_writes_every_artifact_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(2, LossKind::Drp);
    cfg.solver = SolverChoice::Greedy;
    cfg.budgets = vec![20.0, 60.0, 120.0];
    cfg.metrics = vec![MetricKind::Auuc, MetricKind::Aucc, MetricKind::MtAucc, MetricKind::Eom];
    let report = run_experiment(&cfg).unwrap();
    emit_report(&report, dir.path()).unwrap();
    assert_eq!(
        file_names(dir.path()),
        vec![
            "allocation.csv",
            "curve_aucc.csv",
            "curve_auuc.csv",
            "curve_eom.csv",
            "curve_mt_aucc.csv",
            "metrics.csv",
            "model.json",
            "report.json"
        ]
    );
    assert_eq!(load_report(&dir.path().join("report.json")).unwrap(), report);

    for c in &report.curves {
        let text = std::fs::read_to_string(dir.path().join(format!("curve_{}.csv", c.metric))).unwrap();
        assert_eq!(text.lines().count(), c.points.len() + 1, "{}", c.metric);
    }
    // AUCC and MT-AUCC coincide on two levels.
    let value = |name: &str| report.metrics.iter().find(|m| m.name == name).unwrap().value;
    assert!((value("aucc") - value("mt_aucc")).abs() < 1e-12);
    let alloc = std::fs::read_to_string(dir.path().join("allocation.csv")).unwrap();
    assert_eq!(alloc.lines().count(), report.data.n_test + 1);
    for a in &report.allocations {
        assert!(a.planned_cost.unwrap() <= a.budget);
    }
    assert!(report.metrics.iter().all(|m| !m.operation.is_empty() && !m.params.is_empty()));
}

#[test]
fn csv_source_hashes_file_contents() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trial.csv");
    let (ds, _) = gen_mtbap_dataset(&SynthConfig::new(2_000, 3, 3, 0.3, 4)).unwrap();
    ds.write_csv(&path).unwrap();
    let mut cfg = ExperimentConfig::new(
        DatasetSource::Csv {
            path: path.clone(),
            schema: SchemaConfig::standard(3),
        },
        LossKind::Dpm,
    );
    cfg.train.epochs = 10;
    cfg.budgets = vec![10.0];
    cfg.metrics = vec![MetricKind::Eom];
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.data.n_levels, 3);
    assert_eq!(report.data.n_train + report.data.n_test, 2_000);

    let (other, _) = gen_mtbap_dataset(&SynthConfig::new(2_000, 3, 3, 0.3, 5)).unwrap();
    other.write_csv(&path).unwrap();
    assert_ne!(input_hash(&cfg).unwrap(), report.input_hash);

    // A binary-only loss on this file fails once the levels are known.
    cfg.loss = LossKind::Drp;
    cfg.metrics.clear();
    cfg.budgets.clear();
    assert_eq!(run_experiment(&cfg).unwrap_err().stage, Stage::Config);
}

#[test]
fn stage_errors_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "f0,treatment,reward,cost\n0.5,0,1.0,0.0\nzz,1,2.0,1.0\n").unwrap();
    let cfg = ExperimentConfig::new(
        DatasetSource::Csv {
            path,
            schema: SchemaConfig::standard(1),
        },
        LossKind::Drp,
    );
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Data);
    assert!(err.to_string().starts_with("data stage failed"), "{err}");

    let missing = ExperimentConfig::new(
        DatasetSource::Csv {
            path: dir.path().join("nope.csv"),
            schema: SchemaConfig::standard(1),
        },
        LossKind::Drp,
    );
    assert_eq!(run_experiment(&missing).unwrap_err().stage, Stage::Config);
}

#[test]
fn full_size_marginal_run_finishes_within_a_minute() {
    let mut cfg = ExperimentConfig::new(
        DatasetSource::Synth(SynthConfig::new(100_000, 4, 4, 0.5, 0)),
        LossKind::Dpm,
    );
    cfg.train = TrainConfig {
        learning_rate: 5.0,
        epochs: 300,
        ..TrainConfig::default()
    };
    cfg.budgets = vec![1_000.0, 2_000.0, 3_000.0, 4_000.0, 5_000.0];
    cfg.metrics = vec![MetricKind::MtAucc, MetricKind::Eom];
    let start = Instant::now();
    let report = run_experiment(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 60.0, "took {secs:.1}s");
    assert_eq!(report.allocations.len(), 5);
}
