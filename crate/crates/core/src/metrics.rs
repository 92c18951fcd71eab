//! Pointwise, mean-square, relative and maximum errors against the exact field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fdm::{sample_solution, GridSolution};
use crate::network::Params;
use crate::problems::{ProblemId, ProblemSpec};
use crate::sampler::EvalGrid;
use crate::sann::TrialModel;

/// Anything that yields displacement values at a batch of points.
pub trait Predictor {
    fn predict(&self, points: &[(f64, f64)]) -> Result<Vec<f64>>;
}

impl Predictor for Params {
    fn predict(&self, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        Ok(self.forward_batch(points).swap_remove(0))
    }
}

impl Predictor for TrialModel {
    fn predict(&self, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        Ok(self.forward_batch(points))
    }
}

impl Predictor for GridSolution {
    fn predict(&self, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        points
            .iter()
            .map(|&(x, t)| sample_solution(self, x, t))
            .collect()
    }
}

/// The exact solution as a predictor.
pub struct Exact<'a>(pub &'a ProblemSpec);

impl Predictor for Exact<'_> {
    fn predict(&self, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        Ok(points.iter().map(|&(x, t)| self.0.exact(x, t)).collect())
    }
}

/// Pointwise closure.
pub struct FnPredictor<F>(pub F);

impl<F: Fn(f64, f64) -> f64> Predictor for FnPredictor<F> {
    fn predict(&self, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        Ok(points.iter().map(|&(x, t)| (self.0)(x, t)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `|pred - exact|` per node, one row per time.
    pub e1_field: Vec<f64>,
    pub e2: f64,
    pub e3: f64,
    pub e4: f64,
    pub nx: usize,
    pub nt: usize,
    pub model: String,
    pub problem: ProblemId,
}

/// Metrics from already evaluated fields of equal length.
pub fn errors_from_fields(pred: &[f64], exact: &[f64]) -> Result<(Vec<f64>, f64, f64, f64)> {
    if pred.len() != exact.len() || pred.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "field lengths {} and {} must match and be nonzero",
            pred.len(),
            exact.len()
        )));
    }
    let gt_norm = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
    if gt_norm == 0.0 {
        return Err(Error::ZeroReferenceNorm);
    }
    let e1: Vec<f64> = pred.iter().zip(exact).map(|(p, e)| (p - e).abs()).collect();
    let sq: f64 = e1.iter().map(|v| v * v).sum();
    let e2 = sq / e1.len() as f64;
    let e3 = sq.sqrt() / gt_norm;
    let e4 = e1.iter().copied().fold(0.0, f64::max);
    Ok((e1, e2, e3, e4))
}

pub fn compute_errors(
    pred: &dyn Predictor,
    problem: &ProblemSpec,
    grid: &EvalGrid,
    model: &str,
) -> Result<ErrorReport> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation grid".into()));
    }
    let pts = grid.points();
    let p = pred.predict(&pts)?;
    let g = Exact(problem).predict(&pts)?;
    let (e1_field, e2, e3, e4) = errors_from_fields(&p, &g)?;
    Ok(ErrorReport {
        e1_field,
        e2,
        e3,
        e4,
        nx: grid.nx(),
        nt: grid.nt(),
        model: model.to_string(),
        problem: problem.id,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SliceRow {
    pub x: f64,
    pub gt: f64,
    pub pred: f64,
    pub e1: f64,
}

/// Six decimals, with negative zero printed as zero.
pub fn fmt_value(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

/// Scientific notation with three significant digits, e.g. `1.039e-02`.
pub fn fmt_error(v: f64) -> String {
    let s = format!("{v:.3e}");
    match s.split_once('e') {
        Some((m, e)) => {
            let (sign, digits) = match e.strip_prefix('-') {
                Some(d) => ('-', d),
                None => ('+', e),
            };
            format!("{m}e{sign}{digits:0>2}")
        }
        None => s,
    }
}

impl SliceRow {
    pub fn formatted(&self) -> [String; 4] {
        [
            format!("{:.2}", self.x),
            fmt_value(self.gt),
            fmt_value(self.pred),
            fmt_error(self.e1),
        ]
    }
}

/// Rows at `nx` equispaced positions (ends included) at time `t`.
pub fn slice_at_time(pred: &dyn Predictor, problem: &ProblemSpec, t: f64, nx: usize) -> Result<Vec<SliceRow>> {
    let (t0, t1) = problem.t_domain;
    if !(t >= t0 && t <= t1) {
        return Err(Error::OutOfBounds { x: f64::NAN, t });
    }
    if nx < 2 {
        return Err(Error::InvalidArgument("a slice needs at least two points".into()));
    }
    let (a, b) = problem.x_domain;
    let pts: Vec<(f64, f64)> = (0..nx)
        .map(|i| {
            let x = if i == nx - 1 {
                b
            } else {
                a + (b - a) * i as f64 / (nx - 1) as f64
            };
            (x, t)
        })
        .collect();
    let values = pred.predict(&pts)?;
    Ok(pts
        .iter()
        .zip(values)
        .map(|(&(x, t), p)| {
            let gt = problem.exact(x, t);
            SliceRow {
                x,
                gt,
                pred: p,
                e1: (p - gt).abs(),
            }
        })
        .collect())
}
