//! Composite PINN and A-PINN losses.
//!
//! Two paths compute the same quantities. The pointwise path evaluates any
//! [`FieldModel`] through scalar jets and serves as the reference. The batched
//! path ([`LossGraph`]) records the whole loss on a [`Tape`] for training.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Coef, JetLayout, NodeId, Tape};
use crate::error::{Error, Result};
use crate::network::{build_mlp, derivatives, FieldModel, MlpConfig, ModelKind};
use crate::problems::ProblemSpec;
use crate::sampler::CollocationSet;

/// Number of loss terms, ordered `f, b, 0, d, a`.
pub const N_TERMS: usize = 5;
pub const TERM_NAMES: [&str; N_TERMS] = ["l_f", "l_b", "l_0", "l_d", "l_a"];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w_f: f64,
    pub w_b: f64,
    pub w_0: f64,
    pub w_d: f64,
    pub w_a: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            w_f: 1.0,
            w_b: 1.0,
            w_0: 1.0,
            w_d: 0.0,
            w_a: 1.0,
        }
    }
}

impl LossWeights {
    pub fn uniform(w: f64) -> Self {
        LossWeights::from_array([w; N_TERMS])
    }

    pub fn as_array(&self) -> [f64; N_TERMS] {
        [self.w_f, self.w_b, self.w_0, self.w_d, self.w_a]
    }

    pub fn from_array(a: [f64; N_TERMS]) -> Self {
        LossWeights {
            w_f: a[0],
            w_b: a[1],
            w_0: a[2],
            w_d: a[3],
            w_a: a[4],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.as_array();
        if a.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || a.iter().all(|&w| w == 0.0) {
            return Err(Error::InvalidArgument(format!(
                "loss weights must be non-negative with at least one positive: {a:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_f: f64,
    pub l_b: f64,
    pub l_0: f64,
    pub l_d: f64,
    pub l_a: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn from_terms(terms: [f64; N_TERMS], weights: &LossWeights) -> Self {
        let total = terms
            .iter()
            .zip(weights.as_array())
            .map(|(l, w)| l * w)
            .sum();
        LossBreakdown {
            l_f: terms[0],
            l_b: terms[1],
            l_0: terms[2],
            l_d: terms[3],
            l_a: terms[4],
            total,
        }
    }

    pub fn terms(&self) -> [f64; N_TERMS] {
        [self.l_f, self.l_b, self.l_0, self.l_d, self.l_a]
    }
}

/// Observed displacement samples `(x, t, u)`.
pub type Dataset = Vec<(f64, f64, f64)>;

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn check_colloc(colloc: &CollocationSet) -> Result<()> {
    if colloc.interior.is_empty()
        || colloc.boundary.is_empty()
        || colloc.initial.is_empty()
        || colloc.auxiliary.is_empty()
    {
        return Err(Error::InvalidArgument(
            "collocation set has an empty region".into(),
        ));
    }
    Ok(())
}

/// Mean squared misfit against a dataset; zero when the dataset is empty.
pub fn data_loss(model: &dyn FieldModel, dataset: &[(f64, f64, f64)]) -> f64 {
    use crate::autodiff::Jet;
    mean(dataset.iter().map(|&(x, t, u)| {
        let v = model.eval_jets(&Jet::constant(x, 0), &Jet::constant(t, 0))[0].value();
        (v - u).powi(2)
    }))
}

fn initial_term(model: &dyn FieldModel, problem: &ProblemSpec, colloc: &CollocationSet, kind: ModelKind) -> Result<f64> {
    let mut acc = Vec::with_capacity(colloc.initial.len());
    for &x in &colloc.initial {
        let b = derivatives(model, x, problem.t_domain.0, kind)?;
        acc.push((b.u.unwrap() - problem.ic_phi(x)).powi(2) + (b.u_t.unwrap() - problem.ic_phi_t(x)).powi(2));
    }
    Ok(mean(acc.into_iter()))
}

/// Pointwise PINN loss.
pub fn pinn_loss(
    model: &dyn FieldModel,
    problem: &ProblemSpec,
    colloc: &CollocationSet,
    weights: &LossWeights,
    dataset: &[(f64, f64, f64)],
) -> Result<LossBreakdown> {
    check_colloc(colloc)?;
    let kind = ModelKind::Pinn;
    let mut lf = Vec::with_capacity(colloc.interior.len());
    for &(x, t) in &colloc.interior {
        let b = derivatives(model, x, t, kind)?;
        let r = problem.c_sq * b.u_xxxx.unwrap() + b.u_tt.unwrap() + problem.kappa * b.u.unwrap()
            - problem.forcing(x, t);
        lf.push(r * r);
    }
    let mut lb = Vec::with_capacity(colloc.boundary.len());
    for (x, t) in colloc.boundary_points(problem) {
        let b = derivatives(model, x, t, kind)?;
        lb.push(b.u.unwrap().powi(2) + b.u_xx.unwrap().powi(2));
    }
    let l0 = initial_term(model, problem, colloc, kind)?;
    let terms = [
        mean(lf.into_iter()),
        mean(lb.into_iter()),
        l0,
        data_loss(model, dataset),
        0.0,
    ];
    Ok(LossBreakdown::from_terms(terms, weights))
}

/// Pointwise A-PINN loss; the second output stands in for `u_xx`.
pub fn apinn_loss(
    model: &dyn FieldModel,
    problem: &ProblemSpec,
    colloc: &CollocationSet,
    weights: &LossWeights,
    dataset: &[(f64, f64, f64)],
) -> Result<LossBreakdown> {
    check_colloc(colloc)?;
    let kind = ModelKind::Apinn;
    let mut lf = Vec::with_capacity(colloc.interior.len());
    for &(x, t) in &colloc.interior {
        let b = derivatives(model, x, t, kind)?;
        let r = problem.c_sq * b.v_xx.unwrap() + b.u_tt.unwrap() + problem.kappa * b.u.unwrap()
            - problem.forcing(x, t);
        lf.push(r * r);
    }
    let mut lb = Vec::with_capacity(colloc.boundary.len());
    for (x, t) in colloc.boundary_points(problem) {
        let b = derivatives(model, x, t, kind)?;
        lb.push(b.u.unwrap().powi(2) + b.v.unwrap().powi(2));
    }
    let mut la = Vec::with_capacity(colloc.auxiliary.len());
    for &(x, t) in &colloc.auxiliary {
        let b = derivatives(model, x, t, kind)?;
        la.push((b.v.unwrap() - b.u_xx.unwrap()).powi(2));
    }
    let l0 = initial_term(model, problem, colloc, kind)?;
    let terms = [
        mean(lf.into_iter()),
        mean(lb.into_iter()),
        l0,
        data_loss(model, dataset),
        mean(la.into_iter()),
    ];
    Ok(LossBreakdown::from_terms(terms, weights))
}

/// Per-term gradient norms, ordered like [`TERM_NAMES`].
pub type TermNorms = [f64; N_TERMS];

pub const REWEIGHT_ALPHA: f64 = 0.1;
pub const WEIGHT_MIN: f64 = 1e-2;
pub const WEIGHT_MAX: f64 = 1e2;

/// One step of inverse gradient-norm balancing. Terms with zero gradient or
/// zero weight keep their weight.
pub fn adaptive_reweight(grad_norms: &TermNorms, current: &LossWeights) -> Result<LossWeights> {
    if grad_norms.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite gradient norm in {grad_norms:?}"
        )));
    }
    let w = current.as_array();
    let max = grad_norms
        .iter()
        .zip(w)
        .filter(|(_, w)| *w > 0.0)
        .map(|(g, _)| *g)
        .fold(0.0, f64::max);
    if max == 0.0 {
        return Err(Error::ZeroGradientNorms);
    }
    let mut next = w;
    for k in 0..N_TERMS {
        if w[k] > 0.0 && grad_norms[k] > 0.0 {
            let target = max / grad_norms[k];
            next[k] = ((1.0 - REWEIGHT_ALPHA) * w[k] + REWEIGHT_ALPHA * target)
                .clamp(WEIGHT_MIN, WEIGHT_MAX);
        }
    }
    Ok(LossWeights::from_array(next))
}

/// One step of residual-anchored balancing: the residual weight stays put and
/// every other active term moves toward `max|grad l_f| / mean|grad l_k|`.
/// Inputs are per-term `(max |g|, mean |g|)` statistics.
pub fn anchored_reweight(stats: &[(f64, f64); N_TERMS], current: &LossWeights) -> Result<LossWeights> {
    if stats.iter().any(|(m, a)| !m.is_finite() || !a.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite gradient statistic in {stats:?}"
        )));
    }
    let anchor = stats[0].0;
    if anchor == 0.0 {
        return Err(Error::ZeroGradientNorms);
    }
    let w = current.as_array();
    let mut next = w;
    for k in 1..N_TERMS {
        if w[k] > 0.0 && stats[k].1 > 0.0 {
            let target = anchor / stats[k].1;
            next[k] = ((1.0 - REWEIGHT_ALPHA) * w[k] + REWEIGHT_ALPHA * target)
                .clamp(WEIGHT_MIN, WEIGHT_MAX);
        }
    }
    Ok(LossWeights::from_array(next))
}

/// Precomputed point sets and targets for building the batched loss of one
/// network-based model on a tape.
#[derive(Clone, Debug)]
pub struct LossGraph {
    pub kind: ModelKind,
    pub config: MlpConfig,
    problem: ProblemSpec,
    interior: Vec<(f64, f64)>,
    forcing: Vec<f64>,
    boundary: Vec<(f64, f64)>,
    initial: Vec<(f64, f64)>,
    phi: Vec<f64>,
    phi_t: Vec<f64>,
    auxiliary: Vec<(f64, f64)>,
    dataset: Dataset,
}

/// Scalar term nodes of one recorded loss; `None` marks a term that is
/// identically zero for this model.
#[derive(Clone, Copy, Debug)]
pub struct TermNodes {
    pub nodes: [Option<NodeId>; N_TERMS],
}

impl TermNodes {
    pub fn values(&self, tape: &Tape) -> [f64; N_TERMS] {
        let mut v = [0.0; N_TERMS];
        for (k, n) in self.nodes.iter().enumerate() {
            if let Some(id) = n {
                v[k] = tape.scalar(*id);
            }
        }
        v
    }
}

impl LossGraph {
    pub fn new(
        kind: ModelKind,
        config: &MlpConfig,
        problem: &ProblemSpec,
        colloc: &CollocationSet,
        dataset: Dataset,
    ) -> Result<Self> {
        check_colloc(colloc)?;
        let expected = match kind {
            ModelKind::Pinn => 1,
            ModelKind::Apinn => 2,
            other => {
                return Err(Error::Unsupported(format!(
                    "no composite loss for model kind {other}"
                )))
            }
        };
        if config.outputs != expected {
            return Err(Error::OutputArity {
                expected,
                found: config.outputs,
            });
        }
        let initial = colloc.initial_points();
        Ok(LossGraph {
            kind,
            config: config.clone(),
            problem: problem.clone(),
            forcing: colloc
                .interior
                .iter()
                .map(|&(x, t)| problem.forcing(x, t))
                .collect(),
            interior: colloc.interior.clone(),
            boundary: colloc.boundary_points(problem),
            phi: initial.iter().map(|&(x, _)| problem.ic_phi(x)).collect(),
            phi_t: initial.iter().map(|&(x, _)| problem.ic_phi_t(x)).collect(),
            initial,
            auxiliary: colloc.auxiliary.clone(),
            dataset,
        })
    }

    pub fn n_params(&self) -> usize {
        self.config.n_params()
    }

    /// Records every loss term for parameters `theta`.
    pub fn record(&self, tape: &mut Tape, theta: &[f64]) -> TermNodes {
        let p = &self.problem;
        let cfg = &self.config;
        let apinn = self.kind == ModelKind::Apinn;
        let mut nodes = [None; N_TERMS];

        // Residual.
        let layout = if apinn {
            JetLayout::new(2, 2)
        } else {
            JetLayout::new(4, 2)
        };
        let net = build_mlp(cfg, theta, tape, &self.interior, layout, true);
        let u = net.coeff(tape, 0, 0);
        let utt = net.coeff(tape, 0, layout.t_plane(2));
        let stiff = if apinn {
            (net.coeff(tape, 1, layout.x_plane(2)), 2.0 * p.c_sq)
        } else {
            (net.coeff(tape, 0, layout.x_plane(4)), 24.0 * p.c_sq)
        };
        let mut terms = vec![(stiff.0, Coef::Scalar(stiff.1)), (utt, Coef::Scalar(2.0))];
        if p.kappa != 0.0 {
            terms.push((u, Coef::Scalar(p.kappa)));
        }
        let neg_f: Vec<f64> = self.forcing.iter().map(|f| -f).collect();
        let r = tape.lincomb(terms, Some(neg_f));
        nodes[0] = Some(tape.mean_square(r));

        // Boundary.
        if apinn {
            let net = build_mlp(cfg, theta, tape, &self.boundary, JetLayout::VALUE, true);
            let u = net.coeff(tape, 0, 0);
            let v = net.coeff(tape, 1, 0);
            let mu = tape.mean_square(u);
            let mv = tape.mean_square(v);
            nodes[1] = Some(tape.add(mu, mv));
        } else {
            let layout = JetLayout::new(2, 0);
            let net = build_mlp(cfg, theta, tape, &self.boundary, layout, true);
            let u = net.coeff(tape, 0, 0);
            let uxx = net.dx(tape, 0, 2);
            let mu = tape.mean_square(u);
            let mxx = tape.mean_square(uxx);
            nodes[1] = Some(tape.add(mu, mxx));
        }

        // Initial line.
        let layout = JetLayout::new(0, 1);
        let net = build_mlp(cfg, theta, tape, &self.initial, layout, true);
        let u = net.coeff(tape, 0, 0);
        let ut = net.coeff(tape, 0, layout.t_plane(1));
        let du = tape.lincomb(
            vec![(u, Coef::Scalar(1.0))],
            Some(self.phi.iter().map(|v| -v).collect()),
        );
        let dut = tape.lincomb(
            vec![(ut, Coef::Scalar(1.0))],
            Some(self.phi_t.iter().map(|v| -v).collect()),
        );
        let m0 = tape.mean_square(du);
        let m1 = tape.mean_square(dut);
        nodes[2] = Some(tape.add(m0, m1));

        // Data.
        if !self.dataset.is_empty() {
            let pts: Vec<(f64, f64)> = self.dataset.iter().map(|&(x, t, _)| (x, t)).collect();
            let net = build_mlp(cfg, theta, tape, &pts, JetLayout::VALUE, true);
            let u = net.coeff(tape, 0, 0);
            let d = tape.lincomb(
                vec![(u, Coef::Scalar(1.0))],
                Some(self.dataset.iter().map(|&(_, _, v)| -v).collect()),
            );
            nodes[3] = Some(tape.mean_square(d));
        }

        // Auxiliary consistency.
        if apinn {
            let layout = JetLayout::new(2, 0);
            let net = build_mlp(cfg, theta, tape, &self.auxiliary, layout, true);
            let v = net.coeff(tape, 1, 0);
            let u2 = net.coeff(tape, 0, layout.x_plane(2));
            let d = tape.lincomb(vec![(v, Coef::Scalar(1.0)), (u2, Coef::Scalar(-2.0))], None);
            nodes[4] = Some(tape.mean_square(d));
        }
        TermNodes { nodes }
    }
}

/// Weighted sum of the recorded terms as a scalar node.
pub fn weighted_total(tape: &mut Tape, terms: &TermNodes, weights: &LossWeights) -> NodeId {
    let w = weights.as_array();
    let parts: Vec<(NodeId, Coef)> = terms
        .nodes
        .iter()
        .zip(w)
        .filter_map(|(n, w)| n.map(|id| (id, Coef::Scalar(w))))
        .collect();
    tape.lincomb(parts, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_params, Params};
    use crate::problems::{p1, p2, p3};
    use crate::sampler::{sample, Counts, Strategy};
    use std::f64::consts::PI;

    fn small_colloc(p: &ProblemSpec, seed: u64) -> CollocationSet {
        sample(
            p,
            Counts {
                n_f: 12,
                n_b: 4,
                n_0: 6,
                n_a: 8,
            },
            seed,
            Strategy::UniformRandom,
        )
        .unwrap()
    }

    #[test]
    fn exact_fields_have_zero_loss() {
        for p in [p1(), p2(), p3()] {
            let c = small_colloc(&p, 1);
            let w = LossWeights::default();
            let a = pinn_loss(&p.exact_field(), &p, &c, &w, &[]).unwrap();
            assert!(a.total < 1e-15, "{:?}", a);
            let b = apinn_loss(&p.exact_pair_field(), &p, &c, &w, &[]).unwrap();
            assert!(b.total < 1e-15, "{:?}", b);
        }
    }

    #[test]
    fn zero_network_initial_term_on_grid() {
        let p = p1();
        let mut c = small_colloc(&p, 0);
        c.initial = (0..=10).map(|i| i as f64 / 10.0).collect();
        let z = Params::zeros(&MlpConfig::new(1, 3, 1));
        let l = pinn_loss(&z, &p, &c, &LossWeights::default(), &[]).unwrap();
        assert!((l.l_0 - 0.5 * 10.0 / 11.0).abs() < 1e-12);
        assert_eq!(l.l_b, 0.0);
    }

    #[test]
    fn zero_network_residual_is_forcing() {
        let p = p3();
        let c = small_colloc(&p, 2);
        let z = Params::zeros(&MlpConfig::new(1, 3, 2));
        let l = apinn_loss(&z, &p, &c, &LossWeights::default(), &[]).unwrap();
        let want = c.interior.iter().map(|&(x, t)| p.forcing(x, t).powi(2)).sum::<f64>()
            / c.interior.len() as f64;
        assert!((l.l_f - want).abs() < 1e-12 * want);
    }

    #[test]
    fn mismatched_auxiliary_pair() {
        let p = p1();
        let c = small_colloc(&p, 3);
        let m = p.mode;
        let f = crate::network::AnalyticField::new(2, move |x, t| {
            let u = m.jet(x, t);
            vec![u, u * 0.0]
        });
        let l = apinn_loss(&f, &p, &c, &LossWeights::default(), &[]).unwrap();
        let want = c
            .auxiliary
            .iter()
            .map(|&(x, t)| PI.powi(4) * ((PI * x).sin() * (PI * PI * t).cos()).powi(2))
            .sum::<f64>()
            / c.auxiliary.len() as f64;
        assert!(l.l_a > 0.0);
        assert!((l.l_a - want).abs() < 1e-10 * want);
    }

    #[test]
    fn data_term() {
        let p = p1();
        let f = p.exact_field();
        assert_eq!(data_loss(&f, &[]), 0.0);
        let ds: Vec<_> = [(0.2, 0.3), (0.7, 0.1)]
            .iter()
            .map(|&(x, t)| (x, t, p.exact(x, t)))
            .collect();
        assert!(data_loss(&f, &ds) < 1e-18);
        let z = Params::zeros(&MlpConfig::new(1, 2, 1));
        assert!((data_loss(&z, &[(0.5, 0.5, 0.1)]) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn reweight_examples() {
        let one = LossWeights::uniform(1.0);
        assert_eq!(adaptive_reweight(&[2.0; 5], &one).unwrap(), one);
        let w = adaptive_reweight(&[10.0, 1.0, 10.0, 10.0, 10.0], &one).unwrap();
        assert!((w.w_b - 1.9).abs() < 1e-15);
        assert_eq!(w.w_f, 1.0);
        let start = LossWeights::uniform(100.0);
        let w = adaptive_reweight(&[1e5, 1.0, 1e5, 1e5, 1e5], &start).unwrap();
        assert_eq!(w.w_b, WEIGHT_MAX);
        let w = adaptive_reweight(&[1.0, 0.0, 1.0, 1.0, 1.0], &start).unwrap();
        assert_eq!(w.w_b, 100.0);
        assert!(matches!(
            adaptive_reweight(&[0.0; 5], &one),
            Err(Error::ZeroGradientNorms)
        ));
    }

    #[test]
    fn anchored_examples() {
        let one = LossWeights::uniform(1.0);
        // Residual max 4, term means 2: targets are 2 and the residual weight stays.
        let w = anchored_reweight(&[(4.0, 1.0), (3.0, 2.0), (3.0, 2.0), (0.0, 0.0), (3.0, 2.0)], &LossWeights {
            w_d: 0.0,
            ..one
        })
        .unwrap();
        assert_eq!(w.w_f, 1.0);
        assert!((w.w_b - 1.1).abs() < 1e-15 && (w.w_a - 1.1).abs() < 1e-15);
        assert_eq!(w.w_d, 0.0);
        let big = LossWeights::uniform(100.0);
        let w = anchored_reweight(&[(1e9, 1.0); 5], &big).unwrap();
        assert_eq!(w.w_b, WEIGHT_MAX);
        assert_eq!(w.w_f, 100.0);
        assert!(matches!(
            anchored_reweight(&[(0.0, 1.0); 5], &one),
            Err(Error::ZeroGradientNorms)
        ));
        assert!(anchored_reweight(&[(f64::NAN, 1.0); 5], &one).is_err());
    }

    #[test]
    fn total_is_linear_in_weights() {
        let p = p2();
        let c = small_colloc(&p, 4);
        let params = init_params(&MlpConfig::new(2, 5, 2), 3);
        let w = LossWeights::from_array([1.0, 2.0, 0.5, 0.0, 3.0]);
        let a = apinn_loss(&params, &p, &c, &w, &[]).unwrap();
        let w2 = LossWeights::from_array(w.as_array().map(|v| 2.0 * v));
        let b = apinn_loss(&params, &p, &c, &w2, &[]).unwrap();
        assert!((b.total - 2.0 * a.total).abs() <= 1e-12 * a.total.abs().max(1.0));
    }

    #[test]
    fn batched_and_pointwise_losses_agree() {
        for (p, kind) in [(p1(), ModelKind::Pinn), (p3(), ModelKind::Apinn), (p2(), ModelKind::Apinn)] {
            let c = small_colloc(&p, 5);
            let outs = if kind == ModelKind::Apinn { 2 } else { 1 };
            let cfg = MlpConfig::new(2, 5, outs).with_scaling(Some(crate::network::InputScaling {
                x_range: p.x_domain,
                t_range: p.t_domain,
            }));
            let params = init_params(&cfg, 8);
            let ds = vec![(0.3, 0.4, 0.2)];
            let w = LossWeights::from_array([1.0, 1.5, 0.7, 0.3, 2.0]);
            let reference = match kind {
                ModelKind::Pinn => pinn_loss(&params, &p, &c, &w, &ds).unwrap(),
                _ => apinn_loss(&params, &p, &c, &w, &ds).unwrap(),
            };
            let g = LossGraph::new(kind, &cfg, &p, &c, ds).unwrap();
            let mut tape = Tape::new(g.n_params());
            let nodes = g.record(&mut tape, &params.values);
            let vals = nodes.values(&tape);
            for (a, b) in vals.iter().zip(reference.terms()) {
                assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-3), "{vals:?} vs {reference:?}");
            }
            let tot = weighted_total(&mut tape, &nodes, &w);
            assert!((tape.scalar(tot) - reference.total).abs() <= 1e-10 * reference.total);
        }
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let p = p1();
        let c = small_colloc(&p, 0);
        let cfg = MlpConfig::new(1, 3, 1);
        assert!(matches!(
            LossGraph::new(ModelKind::Apinn, &cfg, &p, &c, vec![]),
            Err(Error::OutputArity { .. })
        ));
        let z = Params::zeros(&cfg);
        assert!(apinn_loss(&z, &p, &c, &LossWeights::default(), &[]).is_err());
    }
}
