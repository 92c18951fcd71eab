use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::lbfgs::{lbfgs_step, LbfgsState, LbfgsStatus};
use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::loss::{
    adaptive_reweight, anchored_reweight, weighted_total, LossBreakdown, LossGraph, LossWeights, TermNorms, N_TERMS,
};
use crate::network::{init_params, MlpConfig, ModelKind, Params};
use crate::problems::ProblemSpec;
use crate::sampler::CollocationSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Inverse gradient-norm balancing across all terms.
    Balanced,
    /// Residual-anchored balancing of the constraint terms.
    Anchored,
    Fixed,
}

impl std::str::FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "anchored" => Ok(WeightMode::Anchored),
            "balanced" => Ok(WeightMode::Balanced),
            "fixed" => Ok(WeightMode::Fixed),
            other => Err(Error::InvalidArgument(format!("unknown weight mode '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub total_epochs: usize,
    pub adam_fraction: f64,
    pub learning_rate: f64,
    /// Factor applied to the learning rate at every decay boundary.
    pub lr_decay: f64,
    /// Number of equal Adam sub-phases; the rate decays between them.
    pub lr_decay_stages: usize,
    pub eps_stop: f64,
    pub reweight_interval: usize,
    pub weight_mode: WeightMode,
    pub initial_weights: LossWeights,
    pub divergence_threshold: f64,
    #[serde(default = "default_memory")]
    pub lbfgs_memory: usize,
}

fn default_memory() -> usize {
    100
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            total_epochs: 20_000,
            adam_fraction: 0.2,
            learning_rate: 1e-3,
            lr_decay: 0.5,
            lr_decay_stages: 4,
            eps_stop: 1e-12,
            reweight_interval: 100,
            weight_mode: WeightMode::Anchored,
            initial_weights: LossWeights::default(),
            divergence_threshold: 1e6,
            lbfgs_memory: default_memory(),
        }
    }
}

impl TrainSchedule {
    pub fn for_problem(id: crate::problems::ProblemId) -> Self {
        use crate::problems::ProblemId;
        TrainSchedule {
            total_epochs: match id {
                ProblemId::P1 => 20_000,
                ProblemId::P2 | ProblemId::P3 => 10_000,
            },
            ..Default::default()
        }
    }

    /// Learning-rate preset of 0.1.
    pub fn with_high_lr(mut self) -> Self {
        self.learning_rate = 0.1;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.adam_fraction > 0.0 && self.adam_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "adam_fraction must lie in (0, 1], got {}",
                self.adam_fraction
            )));
        }
        if !(self.eps_stop > 0.0)
            || !(self.learning_rate > 0.0)
            || self.lr_decay_stages == 0
            || self.lbfgs_memory == 0
        {
            return Err(Error::InvalidArgument(
                "eps_stop, learning_rate, lr_decay_stages and lbfgs_memory must be positive".into(),
            ));
        }
        self.initial_weights.validate()
    }

    pub fn adam_epochs(&self) -> usize {
        (self.adam_fraction * self.total_epochs as f64).round() as usize
    }

    /// Step-decayed learning rate for Adam epoch `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let per = self.adam_epochs().div_ceil(self.lr_decay_stages).max(1);
        self.learning_rate * self.lr_decay.powi((epoch / per) as i32)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Completed,
    EarlyStop,
    LineSearchExhausted,
    Stationary,
    Diverged,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Adam,
    Lbfgs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss after each executed epoch.
    pub history: Vec<LossBreakdown>,
    pub final_loss: LossBreakdown,
    pub final_weights: LossWeights,
    pub wall_clock_secs: f64,
    pub seed: u64,
    pub epochs: usize,
    pub adam_epochs: usize,
    pub lbfgs_epochs: usize,
    pub stop_reason: StopReason,
}

impl TrainReport {
    pub fn totals(&self) -> Vec<f64> {
        self.history.iter().map(|b| b.total).collect()
    }
}

/// Snapshot handed to the observer after every epoch.
pub struct EpochEvent<'a> {
    pub epoch: usize,
    pub phase: Phase,
    pub loss: &'a LossBreakdown,
    pub weights: &'a LossWeights,
    pub theta: &'a [f64],
    pub adam_step: u64,
}

/// Differentiable training objective split into the five loss terms.
pub trait Objective {
    fn n_params(&self) -> usize;

    /// Term values and the gradient of their weighted sum.
    fn evaluate(&self, theta: &[f64], weights: &LossWeights) -> Result<(LossBreakdown, Vec<f64>)>;

    /// Term values and per-term gradients; `None` for terms absent from the objective.
    fn term_gradients(&self, theta: &[f64]) -> Result<([f64; N_TERMS], [Option<Vec<f64>>; N_TERMS])>;
}

impl Objective for LossGraph {
    fn n_params(&self) -> usize {
        LossGraph::n_params(self)
    }

    fn evaluate(&self, theta: &[f64], weights: &LossWeights) -> Result<(LossBreakdown, Vec<f64>)> {
        let mut tape = Tape::new(theta.len());
        let nodes = self.record(&mut tape, theta);
        let total = weighted_total(&mut tape, &nodes, weights);
        let grad = tape.backward(total)?;
        Ok((LossBreakdown::from_terms(nodes.values(&tape), weights), grad))
    }

    fn term_gradients(&self, theta: &[f64]) -> Result<([f64; N_TERMS], [Option<Vec<f64>>; N_TERMS])> {
        let mut tape = Tape::new(theta.len());
        let nodes = self.record(&mut tape, theta);
        let mut grads: [Option<Vec<f64>>; N_TERMS] = Default::default();
        for (k, n) in nodes.nodes.iter().enumerate() {
            if let Some(id) = n {
                grads[k] = Some(tape.backward(*id)?);
            }
        }
        Ok((nodes.values(&tape), grads))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn combine(grads: &[Option<Vec<f64>>; N_TERMS], weights: &LossWeights, n: usize) -> Vec<f64> {
    let mut g = vec![0.0; n];
    for (gk, w) in grads.iter().zip(weights.as_array()) {
        if let Some(gk) = gk {
            if w != 0.0 {
                for (a, b) in g.iter_mut().zip(gk) {
                    *a += w * b;
                }
            }
        }
    }
    g
}

fn diverged(b: &LossBreakdown, threshold: f64) -> bool {
    !b.total.is_finite() || b.total > threshold
}

/// Runs the Adam phase then the L-BFGS phase on `obj` starting from `theta`.
pub fn train_objective(
    obj: &dyn Objective,
    theta: &mut Vec<f64>,
    schedule: &TrainSchedule,
    seed: u64,
    observer: &mut dyn FnMut(&EpochEvent),
) -> Result<TrainReport> {
    schedule.validate()?;
    let start = Instant::now();
    let mut weights = schedule.initial_weights;
    let mut history = Vec::new();
    let adam_epochs = schedule.adam_epochs().min(schedule.total_epochs);
    let mut stop = StopReason::Completed;
    let mut adam = AdamState::new(theta.len());
    let mut lbfgs_epochs = 0;

    let report = |history: Vec<LossBreakdown>, weights, stop, adam_done, lbfgs_epochs, start: Instant| {
        let final_loss = history.last().copied().unwrap_or_default();
        TrainReport {
            epochs: history.len(),
            history,
            final_loss,
            final_weights: weights,
            wall_clock_secs: start.elapsed().as_secs_f64(),
            seed,
            adam_epochs: adam_done,
            lbfgs_epochs,
            stop_reason: stop,
        }
    };

    if schedule.total_epochs == 0 {
        return Ok(report(history, weights, stop, 0, 0, start));
    }

    let (mut loss, mut grad) = obj.evaluate(theta, &weights)?;
    let mut prev_total = loss.total;
    let mut adam_done = 0;
    let mut early = false;
    for epoch in 0..adam_epochs {
        if schedule.weight_mode != WeightMode::Fixed
            && epoch > 0
            && epoch % schedule.reweight_interval == 0
        {
            let (_, grads) = obj.term_gradients(theta)?;
            weights = if schedule.weight_mode == WeightMode::Balanced {
                let mut norms: TermNorms = [0.0; N_TERMS];
                for (k, g) in grads.iter().enumerate() {
                    if let Some(g) = g {
                        norms[k] = norm(g);
                    }
                }
                adaptive_reweight(&norms, &weights)?
            } else {
                let mut stats = [(0.0, 0.0); N_TERMS];
                for (k, g) in grads.iter().enumerate() {
                    if let Some(g) = g {
                        let max = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                        let mean = g.iter().map(|v| v.abs()).sum::<f64>() / g.len().max(1) as f64;
                        stats[k] = (max, mean);
                    }
                }
                anchored_reweight(&stats, &weights)?
            };
            grad = combine(&grads, &weights, theta.len());
        }
        adam_step(&mut adam, theta, &grad, schedule.lr_at(epoch))?;
        let (l, g) = obj.evaluate(theta, &weights)?;
        loss = l;
        grad = g;
        history.push(loss);
        adam_done += 1;
        observer(&EpochEvent {
            epoch,
            phase: Phase::Adam,
            loss: &loss,
            weights: &weights,
            theta,
            adam_step: adam.step,
        });
        if diverged(&loss, schedule.divergence_threshold) {
            let r = report(history, weights, StopReason::Diverged, adam_done, 0, start);
            return Err(Error::Diverged {
                epoch,
                loss: loss.total,
                report: Box::new(r),
            });
        }
        if (loss.total - prev_total).abs() < schedule.eps_stop {
            early = true;
            stop = StopReason::EarlyStop;
            break;
        }
        prev_total = loss.total;
    }

    if !early && schedule.total_epochs > adam_epochs {
        let mut state = LbfgsState::default();
        state.memory = schedule.lbfgs_memory;
        // The accepted point is always the most recent oracle evaluation.
        let last = std::cell::Cell::new(loss);
        let mut oracle = |th: &[f64]| -> Result<(f64, Vec<f64>)> {
            let (l, g) = obj.evaluate(th, &weights)?;
            last.set(l);
            Ok((if l.total.is_finite() { l.total } else { f64::INFINITY }, g))
        };
        for epoch in adam_epochs..schedule.total_epochs {
            let step = lbfgs_step(&mut state, theta, loss.total, &grad, &mut oracle)?;
            lbfgs_epochs += 1;
            if step.loss != loss.total {
                loss = last.get();
            }
            grad = step.grad;
            history.push(loss);
            observer(&EpochEvent {
                epoch,
                phase: Phase::Lbfgs,
                loss: &loss,
                weights: &weights,
                theta,
                adam_step: adam.step,
            });
            if diverged(&loss, schedule.divergence_threshold) {
                let r = report(history, weights, StopReason::Diverged, adam_done, lbfgs_epochs, start);
                return Err(Error::Diverged {
                    epoch,
                    loss: loss.total,
                    report: Box::new(r),
                });
            }
            match step.status {
                LbfgsStatus::Exhausted => {
                    stop = StopReason::LineSearchExhausted;
                    break;
                }
                LbfgsStatus::Stationary => {
                    stop = StopReason::Stationary;
                    break;
                }
                LbfgsStatus::Accepted | LbfgsStatus::Fallback
                    if (loss.total - prev_total).abs() < schedule.eps_stop =>
                {
                    stop = StopReason::EarlyStop;
                    break;
                }
                _ => {}
            }
            prev_total = loss.total;
        }
    }
    Ok(report(history, weights, stop, adam_done, lbfgs_epochs, start))
}

/// Trains a PINN or A-PINN network on `problem` from a seeded initialisation.
pub fn train(
    problem: &ProblemSpec,
    kind: ModelKind,
    config: &MlpConfig,
    schedule: &TrainSchedule,
    colloc: &CollocationSet,
    seed: u64,
    observer: &mut dyn FnMut(&EpochEvent),
) -> Result<(Params, TrainReport)> {
    config.validate()?;
    let graph = LossGraph::new(kind, config, problem, colloc, Vec::new())?;
    let mut params = init_params(config, seed);
    let report = train_objective(&graph, &mut params.values, schedule, seed, observer)?;
    Ok((params, report))
}
