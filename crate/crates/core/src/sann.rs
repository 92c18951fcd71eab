//! Trial-function baseline: `u = phi(x) + (x - a)(b - x) t^2 N(x, t)`, which
//! meets the initial conditions and the end displacements for any network `N`.
//! Only the interior residual is trained.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Coef, Jet, JetLayout, Tape};
use crate::error::{Error, Result};
use crate::loss::{LossBreakdown, LossWeights, N_TERMS};
use crate::network::{
    build_mlp, derivatives, init_params, FieldModel, InputScaling, MlpConfig, ModelKind, Params,
};
use crate::optim::{train_objective, EpochEvent, Objective, TrainReport, TrainSchedule, WeightMode};
use crate::problems::ProblemSpec;
use crate::sampler::CollocationSet;

pub const SANN_HIDDEN_LAYERS: usize = 2;
pub const SANN_WIDTH: usize = 20;

pub fn sann_config(problem: &ProblemSpec) -> MlpConfig {
    MlpConfig::new(SANN_HIDDEN_LAYERS, SANN_WIDTH, 1).with_scaling(Some(InputScaling {
        x_range: problem.x_domain,
        t_range: problem.t_domain,
    }))
}

/// The trial function wrapped around a trainable correction network.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialModel {
    pub problem: crate::problems::ProblemId,
    pub net: Params,
    #[serde(skip)]
    spec: Option<ProblemSpec>,
}

impl TrialModel {
    fn spec(&self) -> ProblemSpec {
        self.spec.clone().unwrap_or_else(|| self.problem.spec())
    }

    pub fn with_net(problem: &ProblemSpec, net: Params) -> Result<Self> {
        check_supported(problem)?;
        if net.config.outputs != 1 {
            return Err(Error::OutputArity {
                expected: 1,
                found: net.config.outputs,
            });
        }
        Ok(TrialModel {
            problem: problem.id,
            net,
            spec: Some(problem.clone()),
        })
    }

    /// Values at a batch of points.
    pub fn forward_batch(&self, points: &[(f64, f64)]) -> Vec<f64> {
        let p = self.spec();
        let n = self.net.forward_batch(points);
        points
            .iter()
            .zip(&n[0])
            .map(|(&(x, t), nv)| p.ic_phi(x) + mask(&p, x, t) * nv)
            .collect()
    }
}

fn check_supported(problem: &ProblemSpec) -> Result<()> {
    let (a, b) = problem.x_domain;
    let probe = (0..=16).map(|i| a + (b - a) * i as f64 / 16.0);
    if probe.clone().any(|x| problem.ic_phi_t(x) != 0.0) {
        return Err(Error::Unsupported(
            "trial function assumes zero initial velocity".into(),
        ));
    }
    if problem.ic_phi(a).abs() > 1e-12 || problem.ic_phi(b).abs() > 1e-12 {
        return Err(Error::Unsupported(
            "initial displacement must vanish at both ends".into(),
        ));
    }
    Ok(())
}

fn mask(p: &ProblemSpec, x: f64, t: f64) -> f64 {
    (x - p.x_domain.0) * (p.x_domain.1 - x) * t * t
}

/// Fresh trial model with a seeded correction network.
pub fn build_trial(problem: &ProblemSpec, seed: u64) -> Result<TrialModel> {
    TrialModel::with_net(problem, init_params(&sann_config(problem), seed))
}

/// Trial function around any one-output correction field.
pub struct Trial<'a> {
    pub problem: &'a ProblemSpec,
    pub net: &'a dyn FieldModel,
}

impl FieldModel for Trial<'_> {
    fn outputs(&self) -> usize {
        1
    }

    fn eval_jets(&self, x: &Jet, t: &Jet) -> Vec<Jet> {
        let p = self.problem;
        let order = x.order();
        let alpha = p.mode.jet(x, &Jet::constant(0.0, order));
        let g = (*x - p.x_domain.0) * (Jet::constant(p.x_domain.1, order) - *x) * *t * *t;
        let n = self.net.eval_jets(x, t);
        vec![alpha + g * n[0]]
    }
}

impl FieldModel for TrialModel {
    fn outputs(&self) -> usize {
        1
    }

    fn eval_jets(&self, x: &Jet, t: &Jet) -> Vec<Jet> {
        let p = self.spec();
        Trial {
            problem: &p,
            net: &self.net,
        }
        .eval_jets(x, t)
    }
}

/// Mean squared residual of any one-output field at `points`, pointwise.
pub fn residual_loss(model: &dyn FieldModel, problem: &ProblemSpec, points: &[(f64, f64)]) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("no residual points".into()));
    }
    let mut s = 0.0;
    for &(x, t) in points {
        let d = derivatives(model, x, t, ModelKind::Sann)?;
        let r = problem.c_sq * d.u_xxxx.unwrap() + d.u_tt.unwrap() + problem.kappa * d.u.unwrap()
            - problem.forcing(x, t);
        s += r * r;
    }
    Ok(s / points.len() as f64)
}

/// Batched residual objective over interior points; only the first loss
/// term is populated.
pub struct SannObjective {
    config: MlpConfig,
    points: Vec<(f64, f64)>,
    // Per-point coefficients of the network planes in the residual.
    coefs: Vec<(usize, Vec<f64>)>,
    offset: Vec<f64>,
}

const LAYOUT: JetLayout = JetLayout {
    x_order: 4,
    t_order: 2,
};

impl SannObjective {
    pub fn new(problem: &ProblemSpec, config: &MlpConfig, points: &[(f64, f64)]) -> Result<Self> {
        check_supported(problem)?;
        if points.is_empty() {
            return Err(Error::InvalidArgument("no residual points".into()));
        }
        let (a, b) = problem.x_domain;
        let (c2, k) = (problem.c_sq, problem.kappa);
        let m = problem.mode;
        let col = |f: &dyn Fn(f64, f64) -> f64| points.iter().map(|&(x, t)| f(x, t)).collect::<Vec<_>>();
        let q = |x: f64| (x - a) * (b - x);
        // Taylor coefficients of the mask: x-direction (q, a + b - 2x, -1) t^2,
        // t-direction q (t^2, 2t, 1).
        let coefs = vec![
            (LAYOUT.x_plane(4), col(&|x, t| 24.0 * c2 * t * t * q(x))),
            (LAYOUT.x_plane(3), col(&|x, t| 24.0 * c2 * t * t * (a + b - 2.0 * x))),
            (LAYOUT.x_plane(2), col(&|_, t| -24.0 * c2 * t * t)),
            (LAYOUT.t_plane(2), col(&|x, t| 2.0 * q(x) * t * t)),
            (LAYOUT.t_plane(1), col(&|x, t| 4.0 * q(x) * t)),
            (0, col(&|x, t| 2.0 * q(x) + k * q(x) * t * t)),
        ];
        let offset = col(&|x, t| {
            c2 * m.derivative(x, 0.0, 4, 0) + k * problem.ic_phi(x) - problem.forcing(x, t)
        });
        Ok(SannObjective {
            config: config.clone(),
            points: points.to_vec(),
            coefs,
            offset,
        })
    }

    fn record(&self, tape: &mut Tape, theta: &[f64]) -> crate::autodiff::NodeId {
        let net = build_mlp(&self.config, theta, tape, &self.points, LAYOUT, true);
        let terms = self
            .coefs
            .iter()
            .map(|(plane, c)| (net.coeff(tape, 0, *plane), Coef::PerPoint(c.clone())))
            .collect();
        let r = tape.lincomb(terms, Some(self.offset.clone()));
        tape.mean_square(r)
    }
}

impl Objective for SannObjective {
    fn n_params(&self) -> usize {
        self.config.n_params()
    }

    fn evaluate(&self, theta: &[f64], weights: &LossWeights) -> Result<(LossBreakdown, Vec<f64>)> {
        let mut tape = Tape::new(theta.len());
        let root = self.record(&mut tape, theta);
        let l = tape.scalar(root);
        let mut grad = tape.backward(root)?;
        grad.iter_mut().for_each(|g| *g *= weights.w_f);
        let mut terms = [0.0; N_TERMS];
        terms[0] = l;
        Ok((LossBreakdown::from_terms(terms, weights), grad))
    }

    fn term_gradients(&self, theta: &[f64]) -> Result<([f64; N_TERMS], [Option<Vec<f64>>; N_TERMS])> {
        let mut tape = Tape::new(theta.len());
        let root = self.record(&mut tape, theta);
        let mut terms = [0.0; N_TERMS];
        terms[0] = tape.scalar(root);
        let mut grads: [Option<Vec<f64>>; N_TERMS] = Default::default();
        grads[0] = Some(tape.backward(root)?);
        Ok((terms, grads))
    }
}

/// Residual-only weights; the constraint terms are absent by construction.
pub fn sann_weights() -> LossWeights {
    LossWeights::from_array([1.0, 0.0, 0.0, 0.0, 0.0])
}

/// Trains the correction network on the interior points of `colloc` with
/// fixed residual-only weights.
pub fn train_sann(
    problem: &ProblemSpec,
    schedule: &TrainSchedule,
    colloc: &CollocationSet,
    seed: u64,
    observer: &mut dyn FnMut(&EpochEvent),
) -> Result<(TrialModel, TrainReport)> {
    let mut model = build_trial(problem, seed)?;
    let obj = SannObjective::new(problem, &model.net.config, &colloc.interior)?;
    let schedule = TrainSchedule {
        weight_mode: WeightMode::Fixed,
        initial_weights: sann_weights(),
        ..schedule.clone()
    };
    let report = train_objective(&obj, &mut model.net.values, &schedule, seed, observer)?;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{forward_jet, AnalyticField, Axis};
    use crate::problems::{p1, p2, p3, Mode};
    use crate::sampler::{sample, Counts, Strategy};
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn interior(p: &ProblemSpec, n: usize, seed: u64) -> Vec<(f64, f64)> {
        sample(
            p,
            Counts {
                n_f: n,
                n_b: 1,
                n_0: 1,
                n_a: 1,
            },
            seed,
            Strategy::UniformRandom,
        )
        .unwrap()
        .interior
    }

    #[test]
    fn initial_line_and_ends_hold_for_any_net() {
        let p = p1();
        let m = build_trial(&p, 3).unwrap();
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            let ts = forward_jet(&m, x, 0.0, Axis::T, 1).unwrap();
            assert!((ts[0].value() - (PI * x).sin()).abs() < 1e-15);
            assert!(ts[0].derivative(1).abs() < 1e-15);
        }
        let q = p2();
        let m = build_trial(&q, 5).unwrap();
        for t in [0.1, 0.5, 1.0] {
            assert!(m.forward_batch(&[(0.0, t)])[0].abs() < 1e-12);
            assert!(m.forward_batch(&[(std::f64::consts::PI, t)])[0].abs() < 1e-12);
        }
    }

    use std::f64::consts::PI;

    #[test]
    fn phi_not_vanishing_at_end_rejected() {
        // A mode with no zero at the right end breaks the end conditions.
        let mut p = p1();
        p.mode = Mode { k: 1.5, w: 1.0 };
        assert!(matches!(build_trial(&p, 0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn batched_matches_pointwise_residual() {
        for p in [p1(), p2(), p3()] {
            let m = build_trial(&p, 11).unwrap();
            let pts = interior(&p, 25, 2);
            let obj = SannObjective::new(&p, &m.net.config, &pts).unwrap();
            let (b, _) = obj.evaluate(&m.net.values, &sann_weights()).unwrap();
            let want = residual_loss(&m, &p, &pts).unwrap();
            assert!((b.l_f - want).abs() <= 1e-9 * want.max(1.0), "{} vs {want}", b.l_f);
            assert_eq!(b.total, b.l_f);
        }
    }

    #[test]
    fn perfect_correction_has_no_residual() {
        for p in [p1(), p2(), p3()] {
            let (a, b) = p.x_domain;
            let m = p.mode;
            let perfect = AnalyticField::new(1, move |x, t| {
                let alpha = m.jet(x, &Jet::constant(0.0, x.order()));
                let g = (*x - a) * (Jet::constant(b, x.order()) - *x) * *t * *t;
                vec![(m.jet(x, t) - alpha).div_jet(&g)]
            });
            let trial = Trial {
                problem: &p,
                net: &perfect,
            };
            let pts: Vec<(f64, f64)> = interior(&p, 40, 1)
                .into_iter()
                .filter(|&(x, t)| t > 0.05 && x - a > 0.05 && b - x > 0.05)
                .collect();
            assert!(residual_loss(&trial, &p, &pts).unwrap() < 1e-10);
        }
    }

    // With a zero network only the trial's own residual c^2 phi'''' remains.
    #[test]
    fn untrained_loss_close_to_alpha_residual() {
        let p = p1();
        let pts = interior(&p, 200, 4);
        let alpha_only: f64 = pts
            .iter()
            .map(|&(x, _)| (PI.powi(4) * (PI * x).sin()).powi(2))
            .sum::<f64>()
            / pts.len() as f64;
        let zero = Params::zeros(&sann_config(&p));
        let obj = SannObjective::new(&p, &zero.config, &pts).unwrap();
        let (l0, _) = obj.evaluate(&zero.values, &sann_weights()).unwrap();
        assert!((l0.l_f - alpha_only).abs() < 1e-9 * alpha_only);

        let m = build_trial(&p, 0).unwrap();
        let (l, _) = obj.evaluate(&m.net.values, &sann_weights()).unwrap();
        assert!((l.l_f - alpha_only).abs() < 0.1 * alpha_only, "{} {alpha_only}", l.l_f);
    }

    #[test]
    fn changing_the_net_changes_the_loss() {
        let p = p2();
        let pts = interior(&p, 30, 0);
        let a = build_trial(&p, 0).unwrap();
        let b = build_trial(&p, 1).unwrap();
        assert_ne!(
            residual_loss(&a, &p, &pts).unwrap(),
            residual_loss(&b, &p, &pts).unwrap()
        );
    }

    #[test]
    fn short_training_reduces_residual() {
        let p = p2();
        let colloc = sample(&p, Counts::defaults(p.id), 0, Strategy::UniformRandom).unwrap();
        let s = TrainSchedule {
            total_epochs: 300,
            ..TrainSchedule::for_problem(p.id)
        };
        let (m, r) = train_sann(&p, &s, &colloc, 0, &mut |_| {}).unwrap();
        assert!(r.final_loss.total < r.history[0].total);
        assert_eq!(r.final_weights, sann_weights());
        let direct = residual_loss(&m, &p, &colloc.interior).unwrap();
        assert!((direct - r.final_loss.l_f).abs() <= 1e-8 * direct.max(1.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn constraints_exact_for_random_nets(seed in 0u64..u64::MAX, which in 0usize..3, scale in 0.1f64..3.0) {
            let p = [p1(), p2(), p3()][which].clone();
            let mut net = init_params(&sann_config(&p), seed);
            net.values.iter_mut().for_each(|v| *v *= scale);
            let m = TrialModel::with_net(&p, net).unwrap();
            let (a, b) = p.x_domain;
            for i in 0..10 {
                let s = (i as f64 + 0.5) / 10.0;
                let x = a + (b - a) * s;
                let ts = forward_jet(&m, x, 0.0, Axis::T, 1).unwrap();
                prop_assert!((ts[0].value() - p.ic_phi(x)).abs() < 1e-10);
                prop_assert!(ts[0].derivative(1).abs() < 1e-10);
                let t = p.t_domain.0 + s * (p.t_domain.1 - p.t_domain.0);
                let ends = m.forward_batch(&[(a, t), (b, t)]);
                prop_assert!(ends[0].abs() < 1e-10 && ends[1].abs() < 1e-10);
            }
        }
    }
}
