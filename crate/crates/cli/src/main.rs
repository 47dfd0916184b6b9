use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use decision_factor::validate_dataset;
use dfactor::bench;
use dfactor::pipeline::{load_data, RANDOM_PLANNER, TWO_PHASE_PLANNER};
use dfactor::{emit_report, run_with, DatasetSource, ExperimentConfig, MetricKind, RunOptions, RunReport};

#[derive(Parser)]
#[command(name = "dfactor", version, about = "Learn decision factors from trial data and allocate under a budget")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured synthetic trial and write data.csv and truth.csv.
    Synth(Common),
    /// Read and validate the configured dataset; write data.csv and diagnostics.json.
    Ingest(Common),
    /// Fit the configured model; write report.json and model.json.
    Train(Common),
    /// Train and allocate at each budget; adds allocation.csv.
    Allocate(Common),
    /// Full run with metrics and curves.
    Evaluate(Common),
    /// Full run plus two-phase and random planners at every budget; adds sweep.csv.
    Sweep(Common),
    /// Run the acceptance suite.
    Bench {
        /// Run only these criteria (1-10); all when absent.
        #[arg(long = "criterion")]
        criteria: Vec<usize>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the config budgets; repeat for several.
    #[arg(long = "budget")]
    budgets: Vec<f64>,
    /// Overrides the dual search tolerance.
    #[arg(long)]
    epsilon: Option<f64>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if !self.budgets.is_empty() {
            cfg.budgets = self.budgets.clone();
        }
        if let Some(eps) = self.epsilon {
            cfg.epsilon = eps;
        }
        Ok(cfg)
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_sweep_csv(report: &RunReport, path: &Path) -> Result<()> {
    let mut text = String::from("planner,budget,infeasible,planned_cost,eom_reward,eom_cost,alpha_star,iterations\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for a in &report.allocations {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            a.planner,
            a.budget,
            a.infeasible,
            opt(a.planned_cost),
            opt(a.eom_reward),
            opt(a.eom_cost),
            opt(a.alpha_star),
            a.iterations
        ));
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run_stage(common: &Common, opts: RunOptions, sweep: bool) -> Result<()> {
    let mut cfg = common.resolve()?;
    if !opts.evaluate {
        cfg.metrics.clear();
    }
    if !opts.allocate {
        cfg.budgets.clear();
    }
    if sweep && !cfg.metrics.contains(&MetricKind::Eom) {
        cfg.metrics.push(MetricKind::Eom);
    }
    let report = run_with(&cfg, opts)?;
    let files = emit_report(&report, &cfg.out_dir)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    if sweep {
        let path = cfg.out_dir.join("sweep.csv");
        write_sweep_csv(&report, &path)?;
        println!("wrote {}", path.display());
        for a in report.allocations.iter().filter(|a| a.planner == TWO_PHASE_PLANNER || a.planner == RANDOM_PLANNER) {
            if a.infeasible {
                println!("{:>10} budget {:.4}: infeasible", a.planner, a.budget);
            }
        }
    }
    for m in &report.metrics {
        println!("{} = {}", m.name, m.value);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Synth(c) => {
            let cfg = c.resolve()?;
            if !matches!(cfg.dataset, DatasetSource::Synth(_)) {
                bail!("the synth command needs a synthetic dataset source");
            }
            let (ds, truth) = load_data(&cfg)?;
            ensure_dir(&cfg.out_dir)?;
            ds.write_csv(&cfg.out_dir.join("data.csv"))?;
            if let Some(truth) = truth {
                truth.write_csv(&cfg.out_dir.join("truth.csv"))?;
            }
            println!("wrote {} samples to {}", ds.len(), cfg.out_dir.display());
        }
        Command::Ingest(c) => {
            let cfg = c.resolve()?;
            let (ds, _) = load_data(&cfg)?;
            let diag = validate_dataset(&ds);
            ensure_dir(&cfg.out_dir)?;
            ds.write_csv(&cfg.out_dir.join("data.csv"))?;
            let path = cfg.out_dir.join("diagnostics.json");
            std::fs::write(&path, serde_json::to_string_pretty(&diag)?)
                .with_context(|| format!("writing {}", path.display()))?;
            println!("levels {:?}, counts {:?}", diag.level_map, diag.counts);
            for (flag, ok) in &diag.flags {
                println!("{flag}: {ok}");
            }
        }
        Command::Train(c) => run_stage(
            &c,
            RunOptions {
                allocate: false,
                evaluate: false,
                baselines: false,
            },
            false,
        )?,
        Command::Allocate(c) => run_stage(
            &c,
            RunOptions {
                allocate: true,
                evaluate: false,
                baselines: false,
            },
            false,
        )?,
        Command::Evaluate(c) => run_stage(&c, RunOptions::default(), false)?,
        Command::Sweep(c) => run_stage(
            &c,
            RunOptions {
                allocate: true,
                evaluate: true,
                baselines: true,
            },
            true,
        )?,
        Command::Bench { criteria } => {
            let mut all = true;
            for (i, check) in bench::CRITERIA.iter().enumerate() {
                if !criteria.is_empty() && !criteria.contains(&(i + 1)) {
                    continue;
                }
                let res = check();
                println!("{res}");
                all &= res.passed;
            }
            return Ok(all);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
