//! Collocation point sets and evaluation grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{ProblemId, ProblemSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    UniformRandom,
    Grid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub n_f: usize,
    /// Boundary points per end.
    pub n_b: usize,
    pub n_0: usize,
    pub n_a: usize,
}

impl Counts {
    pub fn defaults(id: ProblemId) -> Counts {
        match id {
            ProblemId::P1 => Counts {
                n_f: 500,
                n_b: 200,
                n_0: 200,
                n_a: 500,
            },
            ProblemId::P2 => Counts {
                n_f: 500,
                n_b: 400,
                n_0: 400,
                n_a: 500,
            },
            ProblemId::P3 => Counts {
                n_f: 1000,
                n_b: 500,
                n_0: 500,
                n_a: 500,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    Left,
    Right,
}

/// Fixed training points; sampled once before training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollocationSet {
    pub interior: Vec<(f64, f64)>,
    pub boundary: Vec<(End, f64)>,
    pub initial: Vec<f64>,
    pub auxiliary: Vec<(f64, f64)>,
    pub counts: Counts,
    pub seed: u64,
    pub strategy: Strategy,
}

impl CollocationSet {
    /// Boundary points as `(x, t)` with the exact domain endpoints.
    pub fn boundary_points(&self, problem: &ProblemSpec) -> Vec<(f64, f64)> {
        self.boundary
            .iter()
            .map(|&(e, t)| match e {
                End::Left => (problem.x_domain.0, t),
                End::Right => (problem.x_domain.1, t),
            })
            .collect()
    }

    pub fn initial_points(&self) -> Vec<(f64, f64)> {
        self.initial.iter().map(|&x| (x, 0.0)).collect()
    }
}

// Independent ChaCha streams per region.
const STREAM_INTERIOR: u64 = 0;
const STREAM_LEFT: u64 = 1;
const STREAM_RIGHT: u64 = 2;
const STREAM_INITIAL: u64 = 3;
const STREAM_AUX: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.5 * (a + b)],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Row-major cell-centred grid with `n` points over the open rectangle; the
/// last row may be partial.
fn interior_grid(problem: &ProblemSpec, n: usize) -> Vec<(f64, f64)> {
    let (x0, x1) = problem.x_domain;
    let (t0, t1) = problem.t_domain;
    let nx = (n as f64).sqrt().round().max(1.0) as usize;
    let nt = n.div_ceil(nx);
    let mut pts = Vec::with_capacity(n);
    'outer: for j in 0..nt {
        for i in 0..nx {
            if pts.len() == n {
                break 'outer;
            }
            pts.push((
                x0 + (x1 - x0) * (i as f64 + 0.5) / nx as f64,
                t0 + (t1 - t0) * (j as f64 + 0.5) / nt as f64,
            ));
        }
    }
    pts
}

pub fn sample(
    problem: &ProblemSpec,
    counts: Counts,
    seed: u64,
    strategy: Strategy,
) -> Result<CollocationSet> {
    problem.validate().map_err(|_| {
        Error::InvalidArgument("cannot sample a zero-measure domain".into())
    })?;
    if counts.n_f == 0 || counts.n_b == 0 || counts.n_0 == 0 || counts.n_a == 0 {
        return Err(Error::InvalidArgument(format!(
            "all collocation counts must be positive, got {counts:?}"
        )));
    }
    let (x0, x1) = problem.x_domain;
    let (t0, t1) = problem.t_domain;
    let set = match strategy {
        Strategy::UniformRandom => {
            let draw_xt = |id, n| {
                let mut rng = stream(seed, id);
                (0..n)
                    .map(|_| (rng.random_range(x0..=x1), rng.random_range(t0..=t1)))
                    .collect::<Vec<_>>()
            };
            let draw_1d = |id, n, a: f64, b: f64| {
                let mut rng = stream(seed, id);
                (0..n).map(|_| rng.random_range(a..=b)).collect::<Vec<_>>()
            };
            let mut boundary: Vec<(End, f64)> = draw_1d(STREAM_LEFT, counts.n_b, t0, t1)
                .into_iter()
                .map(|t| (End::Left, t))
                .collect();
            boundary.extend(
                draw_1d(STREAM_RIGHT, counts.n_b, t0, t1)
                    .into_iter()
                    .map(|t| (End::Right, t)),
            );
            CollocationSet {
                interior: draw_xt(STREAM_INTERIOR, counts.n_f),
                boundary,
                initial: draw_1d(STREAM_INITIAL, counts.n_0, x0, x1),
                auxiliary: draw_xt(STREAM_AUX, counts.n_a),
                counts,
                seed,
                strategy,
            }
        }
        Strategy::Grid => {
            let ts = linspace(t0, t1, counts.n_b);
            let mut boundary: Vec<(End, f64)> = ts.iter().map(|&t| (End::Left, t)).collect();
            boundary.extend(ts.iter().map(|&t| (End::Right, t)));
            CollocationSet {
                interior: interior_grid(problem, counts.n_f),
                boundary,
                initial: linspace(x0, x1, counts.n_0),
                auxiliary: interior_grid(problem, counts.n_a),
                counts,
                seed,
                strategy,
            }
        }
    };
    Ok(set)
}

/// Tensor-product evaluation grid; values are stored row-major with one row per time.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalGrid {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
}

impl EvalGrid {
    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn nt(&self) -> usize {
        self.ts.len()
    }

    pub fn len(&self) -> usize {
        self.xs.len() * self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All nodes, time-major.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.ts
            .iter()
            .flat_map(|&t| self.xs.iter().map(move |&x| (x, t)))
            .collect()
    }
}

pub fn eval_grid(problem: &ProblemSpec, nx: usize, nt: usize) -> Result<EvalGrid> {
    if nx < 2 || nt < 2 {
        return Err(Error::InvalidArgument(format!(
            "evaluation grid needs at least 2 points per axis, got {nx}x{nt}"
        )));
    }
    Ok(EvalGrid {
        xs: linspace(problem.x_domain.0, problem.x_domain.1, nx),
        ts: linspace(problem.t_domain.0, problem.t_domain.1, nt),
    })
}
