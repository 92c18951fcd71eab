use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, RunManifest};
use crate::error::{Error, Result};
use crate::fdm::{solve_fdm, Grid, GridSolution};
use crate::loss::LossWeights;
use crate::metrics::{compute_errors, fmt_error, fmt_value, slice_at_time, ErrorReport, Exact, Predictor};
use crate::network::{ModelKind, Params};
use crate::optim::{train, EpochEvent, StopReason, TrainReport, WeightMode};
use crate::problems::{ProblemId, ProblemSpec};
use crate::sampler::{eval_grid, sample};
use crate::sann::{train_sann, TrialModel};

/// Where a prediction comes from.
pub enum Source {
    Exact,
    Fdm(GridSolution),
    Network(Params),
    Trial(TrialModel),
}

impl Predictor for Source {
    fn predict(&self, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        match self {
            Source::Exact => Err(Error::InvalidArgument(
                "exact source needs a problem; use metrics::Exact".into(),
            )),
            Source::Fdm(s) => s.predict(points),
            Source::Network(p) => p.predict(points),
            Source::Trial(m) => m.predict(points),
        }
    }
}

pub struct ModelRef {
    pub label: String,
    pub source: Source,
}

impl ModelRef {
    fn predictor<'a>(&'a self, exact: &'a Exact<'a>) -> &'a dyn Predictor {
        match &self.source {
            Source::Exact => exact,
            s => s,
        }
    }
}

/// Reads a parameter file or a run directory holding `params.json`.
pub fn load_artifact(path: &Path) -> Result<Source> {
    let file = if path.is_dir() {
        path.join("params.json")
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&file).map_err(|e| {
        Error::InvalidArgument(format!("cannot read artifact {}: {e}", file.display()))
    })?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    if value.get("net").is_some() {
        Ok(Source::Trial(serde_json::from_value(value)?))
    } else {
        Ok(Source::Network(Params::from_json(&text)?))
    }
}

/// Parses `exact`, `fdm` or `label=path`.
pub fn parse_model_ref(spec: &str, problem: &ProblemSpec, fdm_nx: usize, fdm_dt: Option<f64>) -> Result<ModelRef> {
    match spec.split_once('=') {
        Some((label, path)) => Ok(ModelRef {
            label: label.to_string(),
            source: load_artifact(Path::new(path))?,
        }),
        None => match spec {
            "exact" | "gt" => Ok(ModelRef {
                label: "exact".into(),
                source: Source::Exact,
            }),
            "fdm" => Ok(ModelRef {
                label: "fdm".into(),
                source: Source::Fdm(solve_fdm(problem, &Grid::new(problem, fdm_nx, fdm_dt)?)?),
            }),
            other => Err(Error::InvalidArgument(format!(
                "model '{other}' needs an artifact: use {other}=<params.json or run dir>"
            ))),
        },
    }
}

fn safe(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Dense field: header of x values, then one row per time level.
pub fn field_csv(xs: &[f64], nt: usize, values: &[f64]) -> String {
    let mut s = String::new();
    let head: Vec<String> = xs.iter().map(|x| format!("{x:.8e}")).collect();
    s.push_str(&head.join(","));
    s.push('\n');
    for j in 0..nt {
        let row: Vec<String> = values[j * xs.len()..(j + 1) * xs.len()]
            .iter()
            .map(|v| format!("{v:.8e}"))
            .collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub problem: ProblemId,
    pub model: ModelKind,
    pub seed: u64,
    pub final_loss: crate::loss::LossBreakdown,
    pub final_weights: LossWeights,
    pub epochs: usize,
    pub adam_epochs: usize,
    pub lbfgs_epochs: usize,
    pub stop_reason: StopReason,
    pub wall_clock_secs: f64,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
}

#[derive(Serialize)]
struct Checkpoint<'a> {
    epoch: usize,
    adam_step: u64,
    params: &'a Params,
}

fn log_csv(report: &TrainReport) -> String {
    let mut s = String::from("epoch,l_f,l_b,l_0,l_a,total\n");
    for (k, b) in report.history.iter().enumerate() {
        let _ = writeln!(s, "{k},{},{},{},{},{}", b.l_f, b.l_b, b.l_0, b.l_a, b.total);
    }
    s
}

/// Trains one network model and writes its artifacts into `config.out_dir`.
pub fn cmd_train(config: &ExperimentConfig) -> Result<TrainSummary> {
    config.validate()?;
    if config.model == ModelKind::Fdm {
        return Err(Error::InvalidArgument(
            "fdm is not trainable; use evaluate/table with --model fdm".into(),
        ));
    }
    let dir = &config.out_dir;
    fs::create_dir_all(dir)?;
    let mut manifest = RunManifest::start(config)?;
    fs::write(dir.join("config.json"), config.to_json()?)?;
    manifest.artifacts.push("config.json".into());

    let problem = config.problem.spec();
    let colloc = sample(&problem, config.counts, config.seed, config.strategy)?;
    let mut ckpt_err: Option<Error> = None;
    let mut wrote_ckpt = false;
    let every = config.checkpoint_every;
    let net_config = config.mlp.clone();
    let seed = config.seed;
    let mut observer = |e: &EpochEvent| {
        if every > 0 && (e.epoch + 1) % every == 0 && ckpt_err.is_none() {
            let params = match Params::from_flat(net_config.clone(), seed, e.theta.to_vec()) {
                Ok(p) => p,
                Err(err) => {
                    ckpt_err = Some(err);
                    return;
                }
            };
            let c = Checkpoint {
                epoch: e.epoch,
                adam_step: e.adam_step,
                params: &params,
            };
            match serde_json::to_string(&c) {
                Ok(s) => match fs::write(dir.join("checkpoint.json"), s) {
                    Ok(()) => wrote_ckpt = true,
                    Err(err) => ckpt_err = Some(err.into()),
                },
                Err(err) => ckpt_err = Some(err.into()),
            }
        }
    };

    let trained = match config.model {
        ModelKind::Sann => train_sann(&problem, &config.schedule, &colloc, seed, &mut observer)
            .map(|(m, r)| (Source::Trial(m), r)),
        kind => train(&problem, kind, &config.mlp, &config.schedule, &colloc, seed, &mut observer)
            .map(|(p, r)| (Source::Network(p), r)),
    };
    if let Some(err) = ckpt_err {
        return Err(err);
    }
    if wrote_ckpt {
        manifest.artifacts.push("checkpoint.json".into());
    }
    let (source, report) = match trained {
        Ok(v) => v,
        Err(Error::Diverged { epoch, loss, report }) => {
            fs::write(dir.join("train_log.csv"), log_csv(&report))?;
            let diag = serde_json::json!({
                "error": format!("diverged at epoch {epoch} with loss {loss}"),
                "epoch": epoch,
                "loss": loss,
                "final_loss": report.final_loss,
                "final_weights": report.final_weights,
            });
            fs::write(dir.join("diverged.json"), serde_json::to_string_pretty(&diag)?)?;
            manifest.artifacts.push("train_log.csv".into());
            manifest.artifacts.push("diverged.json".into());
            manifest.finish(dir)?;
            return Err(Error::Diverged { epoch, loss, report });
        }
        Err(e) => return Err(e),
    };

    let params_json = match &source {
        Source::Trial(m) => serde_json::to_string(m)?,
        Source::Network(p) => p.to_json()?,
        _ => unreachable!(),
    };
    fs::write(dir.join("params.json"), params_json)?;
    fs::write(dir.join("train_log.csv"), log_csv(&report))?;
    let grid = eval_grid(&problem, config.eval_nx, config.eval_nt)?;
    let errors = compute_errors(&source, &problem, &grid, config.model.name())?;
    let summary = TrainSummary {
        problem: config.problem,
        model: config.model,
        seed,
        final_loss: report.final_loss,
        final_weights: report.final_weights,
        epochs: report.epochs,
        adam_epochs: report.adam_epochs,
        lbfgs_epochs: report.lbfgs_epochs,
        stop_reason: report.stop_reason,
        wall_clock_secs: report.wall_clock_secs,
        e2: errors.e2,
        e3: errors.e3,
        e4: errors.e4,
    };
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&summary)?)?;
    manifest
        .artifacts
        .extend(["params.json", "train_log.csv", "report.json"].map(String::from));
    manifest.finish(dir)?;
    Ok(summary)
}

/// Error reports for every model; writes `summary.csv` and one dense
/// `e1_<label>.csv` per model.
pub fn cmd_evaluate(
    problem: &ProblemSpec,
    models: &[ModelRef],
    nx: usize,
    nt: usize,
    out: &Path,
) -> Result<Vec<ErrorReport>> {
    fs::create_dir_all(out)?;
    let grid = eval_grid(problem, nx, nt)?;
    let exact = Exact(problem);
    let mut reports = Vec::new();
    let mut summary = String::from("model,E2,E3,E4\n");
    for m in models {
        let r = compute_errors(m.predictor(&exact), problem, &grid, &m.label)?;
        let _ = writeln!(summary, "{},{:e},{:e},{:e}", m.label, r.e2, r.e3, r.e4);
        fs::write(
            out.join(format!("e1_{}.csv", safe(&m.label))),
            field_csv(&grid.xs, grid.nt(), &r.e1_field),
        )?;
        reports.push(r);
    }
    fs::write(out.join("summary.csv"), summary)?;
    Ok(reports)
}

/// Slice table at time `t`: x, GT, each model's values, each model's E1.
pub fn table_csv(problem: &ProblemSpec, t: f64, models: &[ModelRef], nx: usize) -> Result<String> {
    let exact = Exact(problem);
    let mut cols = Vec::new();
    for m in models {
        cols.push(slice_at_time(m.predictor(&exact), problem, t, nx)?);
    }
    let gt = slice_at_time(&exact, problem, t, nx)?;
    let mut s = String::from("x,GT");
    for m in models {
        let _ = write!(s, ",{}", m.label);
    }
    for m in models {
        let _ = write!(s, ",E1 {}", m.label);
    }
    s.push('\n');
    for (i, row) in gt.iter().enumerate() {
        let f = row.formatted();
        let _ = write!(s, "{},{}", f[0], f[1]);
        for c in &cols {
            let _ = write!(s, ",{}", fmt_value(c[i].pred));
        }
        for c in &cols {
            let _ = write!(s, ",{}", fmt_error(c[i].e1));
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn table_name(problem: ProblemId, t: f64) -> String {
    format!("table_{problem}_t{t}.csv")
}

pub fn cmd_table(problem: &ProblemSpec, t: f64, models: &[ModelRef], out: &Path) -> Result<PathBuf> {
    let csv = table_csv(problem, t, models, 11)?;
    fs::create_dir_all(out)?;
    let path = out.join(table_name(problem.id, t));
    fs::write(&path, csv)?;
    Ok(path)
}

/// Writes `field_<label>.csv`, `field_gt.csv` and `field_e1_<label>.csv`.
pub fn cmd_export_field(problem: &ProblemSpec, model: &ModelRef, nx: usize, nt: usize, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let grid = eval_grid(problem, nx, nt)?;
    let pts = grid.points();
    let exact = Exact(problem);
    let pred = model.predictor(&exact).predict(&pts)?;
    let gt = exact.predict(&pts)?;
    let e1: Vec<f64> = pred.iter().zip(&gt).map(|(p, g)| (p - g).abs()).collect();
    let label = safe(&model.label);
    let mut paths = Vec::new();
    for (name, values) in [
        (format!("field_{label}.csv"), &pred),
        ("field_gt.csv".to_string(), &gt),
        (format!("field_e1_{label}.csv"), &e1),
    ] {
        let p = out.join(name);
        fs::write(&p, field_csv(&grid.xs, grid.nt(), values))?;
        paths.push(p);
    }
    Ok(paths)
}

/// Tabulated exact values at the comparison slices: `(problem, t, x, value)`,
/// both as printed with two and six decimals.
pub fn reference_slices() -> Vec<(ProblemId, f64, String, String)> {
    include_str!("reference_slices.csv")
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].parse().expect("problem id"),
                f[1].parse().expect("time"),
                f[2].to_string(),
                f[3].to_string(),
            )
        })
        .collect()
}

/// Times of the two comparison slices per problem.
pub fn slice_times(problem: ProblemId) -> [f64; 2] {
    match problem {
        ProblemId::P1 => [0.5, 0.9],
        ProblemId::P2 => [0.4, 0.8],
        ProblemId::P3 => [0.3, 0.9],
    }
}

/// Compares an emitted slice table's x and GT columns with the tabulated values.
pub fn check_gt_column(csv: &str, problem: ProblemId, t: f64) -> std::result::Result<(), String> {
    let want: Vec<(String, String)> = reference_slices()
        .into_iter()
        .filter(|r| r.0 == problem && (r.1 - t).abs() < 1e-12)
        .map(|r| (r.2, r.3))
        .collect();
    let got: Vec<(String, String)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            (
                f.next().unwrap_or("").to_string(),
                f.next().unwrap_or("").to_string(),
            )
        })
        .collect();
    if want.is_empty() {
        return Err(format!("no reference slice for {problem} at t={t}"));
    }
    if got != want {
        return Err(format!("GT column mismatch: got {got:?}, want {want:?}"));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct ReproduceOptions {
    pub seeds: Vec<u64>,
    pub epochs: Option<usize>,
    pub out: PathBuf,
    pub strict: bool,
    pub weight_mode: Option<WeightMode>,
    pub high_lr: bool,
    pub problems: Vec<ProblemId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn check(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        pass,
        detail: detail.into(),
    }
}

/// Runs the full model matrix and writes tables, metrics, losses and a
/// pass/fail sheet under `opts.out`.
pub fn cmd_reproduce(opts: &ReproduceOptions) -> Result<Vec<Check>> {
    let out = &opts.out;
    fs::create_dir_all(out)?;
    let mut checks = Vec::new();
    let mut metrics = String::from("problem,model,E2,E3,E4,runs\n");
    let mut losses = String::from("problem,model,final_loss,epochs,runs\n");
    let mut artifacts = Vec::new();
    for &pid in &opts.problems {
        let problem = pid.spec();
        let mut chosen: Vec<ModelRef> = Vec::new();
        let mut med = std::collections::HashMap::new();
        let fdm = parse_model_ref("fdm", &problem, crate::fdm::DEFAULT_NX, None)?;
        let grid = eval_grid(&problem, 101, 101)?;
        let fr = compute_errors(&fdm.source, &problem, &grid, "fdm")?;
        let _ = writeln!(metrics, "{pid},fdm,{:e},{:e},{:e},1", fr.e2, fr.e3, fr.e4);
        med.insert(ModelKind::Fdm, (fr.e2, fr.e3, f64::NAN));
        chosen.push(fdm);
        for kind in [ModelKind::Sann, ModelKind::Pinn, ModelKind::Apinn] {
            let mut runs = Vec::new();
            for &seed in &opts.seeds {
                let mut c = ExperimentConfig::defaults(pid, kind);
                c.seed = seed;
                c.out_dir = out.join(pid.name()).join(kind.name()).join(format!("seed{seed}"));
                c.checkpoint_every = 0;
                if let Some(e) = opts.epochs {
                    c.schedule.total_epochs = e;
                }
                if let Some(m) = opts.weight_mode {
                    c.schedule.weight_mode = m;
                }
                if opts.high_lr {
                    c.schedule = c.schedule.with_high_lr();
                }
                match cmd_train(&c) {
                    Ok(s) => runs.push((s, c.out_dir.clone())),
                    Err(e) => checks.push(check(
                        format!("run {pid} {kind} seed {seed}"),
                        false,
                        e.to_string(),
                    )),
                }
            }
            if runs.is_empty() {
                continue;
            }
            let e2 = median(runs.iter().map(|r| r.0.e2).collect());
            let e3 = median(runs.iter().map(|r| r.0.e3).collect());
            let e4 = median(runs.iter().map(|r| r.0.e4).collect());
            let loss = median(runs.iter().map(|r| r.0.final_loss.total).collect());
            let epochs = median(runs.iter().map(|r| r.0.epochs as f64).collect());
            let _ = writeln!(metrics, "{pid},{kind},{e2:e},{e3:e},{e4:e},{}", runs.len());
            let _ = writeln!(losses, "{pid},{kind},{loss:e},{epochs},{}", runs.len());
            med.insert(kind, (e2, e3, loss));
            // Tables use the run closest to the median E3.
            let rep = runs
                .iter()
                .min_by(|a, b| (a.0.e3 - e3).abs().total_cmp(&(b.0.e3 - e3).abs()))
                .unwrap();
            chosen.push(ModelRef {
                label: kind.name().into(),
                source: load_artifact(&rep.1)?,
            });
        }

        for t in slice_times(pid) {
            let csv = table_csv(&problem, t, &chosen, 11)?;
            let name = table_name(pid, t);
            fs::write(out.join(&name), &csv)?;
            artifacts.push(name.clone());
            let r = check_gt_column(&csv, pid, t);
            checks.push(check(
                format!("GT column {pid} t={t}"),
                r.is_ok(),
                r.err().unwrap_or_default(),
            ));
        }
        let baselines: Vec<ModelRef> = chosen
            .into_iter()
            .filter(|m| m.label == "fdm" || m.label == "sann")
            .collect();
        let mut s = String::from("x");
        for t in slice_times(pid) {
            let _ = write!(s, ",GT t={t}");
            for m in &baselines {
                let _ = write!(s, ",E1 {} t={t}", m.label);
            }
        }
        s.push('\n');
        let slices: Vec<(Vec<_>, Vec<Vec<_>>)> = slice_times(pid)
            .iter()
            .map(|&t| -> Result<_> {
                let gt = slice_at_time(&Exact(&problem), &problem, t, 11)?;
                let cols = baselines
                    .iter()
                    .map(|m| slice_at_time(&m.source, &problem, t, 11))
                    .collect::<Result<Vec<_>>>()?;
                Ok((gt, cols))
            })
            .collect::<Result<_>>()?;
        for i in 0..11 {
            let _ = write!(s, "{}", slices[0].0[i].formatted()[0]);
            for (gt, cols) in &slices {
                let _ = write!(s, ",{}", fmt_value(gt[i].gt));
                for c in cols {
                    let _ = write!(s, ",{:.6e}", c[i].e1);
                }
            }
            s.push('\n');
        }
        let name = format!("baseline_errors_{pid}.csv");
        fs::write(out.join(&name), s)?;
        artifacts.push(name);

        if let Some(&(_, e3, loss)) = med.get(&ModelKind::Apinn) {
            checks.push(check(format!("apinn E3 <= 1e-2 on {pid}"), e3 <= 1e-2, format!("median E3 {e3:e}")));
            checks.push(check(
                format!("apinn loss <= 1e-4 on {pid}"),
                loss <= 1e-4,
                format!("median final loss {loss:e}"),
            ));
        }
        if matches!(pid, ProblemId::P1 | ProblemId::P3) {
            if let (Some(a), Some(p)) = (med.get(&ModelKind::Apinn), med.get(&ModelKind::Pinn)) {
                checks.push(check(
                    format!("apinn E2 < pinn E2 on {pid}"),
                    a.0 < p.0,
                    format!("{:e} vs {:e}", a.0, p.0),
                ));
            }
        }
        if matches!(pid, ProblemId::P2 | ProblemId::P3) {
            if let (Some(a), Some(f)) = (med.get(&ModelKind::Apinn), med.get(&ModelKind::Fdm)) {
                checks.push(check(
                    format!("apinn E3 < fdm E3 on {pid}"),
                    a.1 < f.1,
                    format!("{:e} vs {:e}", a.1, f.1),
                ));
            }
        }
    }
    fs::write(out.join("metrics.csv"), metrics)?;
    fs::write(out.join("losses.csv"), losses)?;
    let mut sheet = String::from("check,result,detail\n");
    for c in &checks {
        let _ = writeln!(
            sheet,
            "{},{},\"{}\"",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.detail.replace('"', "'")
        );
    }
    fs::write(out.join("sheet.csv"), sheet)?;
    artifacts.extend(["metrics.csv", "losses.csv", "sheet.csv"].map(String::from));
    let index = serde_json::json!({ "artifacts": artifacts, "seeds": opts.seeds });
    fs::write(out.join("index.json"), serde_json::to_string_pretty(&index)?)?;
    Ok(checks)
}
