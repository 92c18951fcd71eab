//! Command-line experiment harness.

mod commands;
mod config;

pub use commands::{
    check_gt_column, cmd_evaluate, cmd_export_field, cmd_reproduce, cmd_table, cmd_train, field_csv,
    load_artifact, parse_model_ref, reference_slices, slice_times, table_csv, table_name, Check,
    ModelRef, ReproduceOptions, Source, TrainSummary,
};
pub use config::{unix_now, ExperimentConfig, RunManifest};

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::fdm::DEFAULT_NX;
use crate::network::ModelKind;
use crate::optim::WeightMode;
use crate::problems::ProblemId;

#[derive(Debug, Parser)]
#[command(name = "beam-pinn", version, about = "Physics-informed and classical solvers for beam vibration")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a network model and write its artifacts.
    Train(TrainArgs),
    /// Error metrics of one or more models on the evaluation grid.
    Evaluate(EvalArgs),
    /// Slice table at one time.
    Table(TableArgs),
    /// Dense predicted, exact and error fields for plotting.
    ExportField(ExportArgs),
    /// Run every problem and model and write tables plus a pass/fail sheet.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, default_value = "p1")]
    pub problem: ProblemId,
    #[arg(long, default_value = "apinn")]
    pub model: ModelKind,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON experiment config; command-line flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Sequential reductions only (always the case in this build).
    #[arg(long)]
    pub deterministic: bool,
    /// Shorthand for `--weight-mode fixed`.
    #[arg(long)]
    pub fixed_weights: bool,
    /// anchored (default), balanced or fixed.
    #[arg(long)]
    pub weight_mode: Option<WeightMode>,
    /// Adam learning rate 0.1 instead of 1e-3.
    #[arg(long)]
    pub high_lr: bool,
}

/// Models are `exact`, `fdm`, or `label=<params.json or run dir>`.
#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub problem: ProblemId,
    #[arg(long = "model", required = true)]
    pub models: Vec<String>,
    #[arg(long, default_value_t = 101)]
    pub nx: usize,
    #[arg(long, default_value_t = 101)]
    pub nt: usize,
    #[arg(long, default_value = "eval")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long)]
    pub problem: ProblemId,
    #[arg(long)]
    pub t: f64,
    #[arg(long = "model")]
    pub models: Vec<String>,
    #[arg(long, default_value = "tables")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub problem: ProblemId,
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value_t = 101)]
    pub nx: usize,
    #[arg(long, default_value_t = 101)]
    pub nt: usize,
    #[arg(long, default_value = "fields")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "p1,p2,p3")]
    pub problems: Vec<ProblemId>,
    /// Override every run's epoch budget (for quick checks).
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value = "reproduce")]
    pub out: PathBuf,
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long)]
    pub fixed_weights: bool,
    #[arg(long)]
    pub weight_mode: Option<WeightMode>,
    /// Adam learning rate 0.1 instead of 1e-3.
    #[arg(long)]
    pub high_lr: bool,
}

fn weight_mode(fixed: bool, mode: Option<WeightMode>) -> Result<Option<WeightMode>> {
    match (fixed, mode) {
        (true, Some(m)) if m != WeightMode::Fixed => Err(Error::InvalidArgument(
            "--fixed-weights conflicts with --weight-mode".into(),
        )),
        (true, _) => Ok(Some(WeightMode::Fixed)),
        (false, m) => Ok(m),
    }
}

fn train_config(a: &TrainArgs) -> Result<ExperimentConfig> {
    let mut c = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::defaults(a.problem, a.model),
    };
    if a.config.is_none() {
        c.problem = a.problem;
        c.model = a.model;
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if let Some(o) = &a.out {
        c.out_dir = o.clone();
    }
    if let Some(e) = a.epochs {
        c.schedule.total_epochs = e;
    }
    if a.deterministic {
        c.deterministic = true;
    }
    if let Some(m) = weight_mode(a.fixed_weights, a.weight_mode)? {
        c.schedule.weight_mode = m;
    }
    if a.high_lr {
        c.schedule = c.schedule.clone().with_high_lr();
    }
    c.validate()?;
    Ok(c)
}

/// Executes a parsed command line; the returned code is the process exit status.
pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Train(a) => {
            let c = train_config(&a)?;
            let s = cmd_train(&c)?;
            println!(
                "{} {} seed {}: loss {:e} after {} epochs ({:?}); E2 {:e} E3 {:e} E4 {:e}; artifacts in {}",
                s.problem,
                s.model,
                s.seed,
                s.final_loss.total,
                s.epochs,
                s.stop_reason,
                s.e2,
                s.e3,
                s.e4,
                c.out_dir.display()
            );
            Ok(0)
        }
        Command::Evaluate(a) => {
            let p = a.problem.spec();
            let models = a
                .models
                .iter()
                .map(|m| parse_model_ref(m, &p, DEFAULT_NX, None))
                .collect::<Result<Vec<_>>>()?;
            for r in cmd_evaluate(&p, &models, a.nx, a.nt, &a.out)? {
                println!("{}: E2 {:e} E3 {:e} E4 {:e}", r.model, r.e2, r.e3, r.e4);
            }
            Ok(0)
        }
        Command::Table(a) => {
            let p = a.problem.spec();
            let models = a
                .models
                .iter()
                .map(|m| parse_model_ref(m, &p, DEFAULT_NX, None))
                .collect::<Result<Vec<_>>>()?;
            let path = cmd_table(&p, a.t, &models, &a.out)?;
            print!("{}", std::fs::read_to_string(&path)?);
            Ok(0)
        }
        Command::ExportField(a) => {
            let p = a.problem.spec();
            let m = parse_model_ref(&a.model, &p, DEFAULT_NX, None)?;
            for path in cmd_export_field(&p, &m, a.nx, a.nt, &a.out)? {
                println!("{}", path.display());
            }
            Ok(0)
        }
        Command::Reproduce(a) => {
            if a.seeds.is_empty() {
                return Err(Error::InvalidArgument("at least one seed is required".into()));
            }
            let checks = cmd_reproduce(&ReproduceOptions {
                seeds: a.seeds,
                epochs: a.epochs,
                out: a.out.clone(),
                strict: a.strict,
                weight_mode: weight_mode(a.fixed_weights, a.weight_mode)?,
                high_lr: a.high_lr,
                problems: a.problems,
            })?;
            let mut failed = 0;
            for c in &checks {
                println!("{} {} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.pass);
            }
            println!("{} checks, {failed} failed; sheet at {}", checks.len(), a.out.join("sheet.csv").display());
            Ok(if a.strict && failed > 0 { 1 } else { 0 })
        }
    }
}
