use std::collections::VecDeque;

use crate::error::Result;

/// Limited-memory BFGS with a strong Wolfe line search.
#[derive(Clone, Debug)]
pub struct LbfgsState {
    pub memory: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
    pub max_failures: usize,
    s: VecDeque<Vec<f64>>,
    y: VecDeque<Vec<f64>>,
    failures: usize,
    last_step: f64,
}

/// Minimum curvature `s.y` for a pair to enter the history.
pub const CURVATURE_EPS: f64 = 1e-10;

impl Default for LbfgsState {
    fn default() -> Self {
        LbfgsState {
            memory: 10,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 25,
            max_failures: 3,
            s: VecDeque::new(),
            y: VecDeque::new(),
            failures: 0,
            last_step: 1.0,
        }
    }
}

impl LbfgsState {
    pub fn history_len(&self) -> usize {
        self.s.len()
    }

    /// Stored pairs `(s, y)`.
    pub fn pairs(&self) -> impl Iterator<Item = (&Vec<f64>, &Vec<f64>)> {
        self.s.iter().zip(self.y.iter())
    }

    pub fn consecutive_failures(&self) -> usize {
        self.failures
    }

    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let k = self.s.len();
        let mut q: Vec<f64> = g.to_vec();
        let mut alpha = vec![0.0; k];
        let rho: Vec<f64> = self.pairs().map(|(s, y)| 1.0 / dot(s, y)).collect();
        for i in (0..k).rev() {
            alpha[i] = rho[i] * dot(&self.s[i], &q);
            axpy(-alpha[i], &self.y[i], &mut q);
        }
        if k > 0 {
            let gamma = dot(&self.s[k - 1], &self.y[k - 1]) / dot(&self.y[k - 1], &self.y[k - 1]);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..k {
            let beta = rho[i] * dot(&self.y[i], &q);
            axpy(alpha[i] - beta, &self.s[i], &mut q);
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }

    fn push_pair(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        if dot(&s, &y) > CURVATURE_EPS {
            if self.s.len() == self.memory {
                self.s.pop_front();
                self.y.pop_front();
            }
            self.s.push_back(s);
            self.y.push_back(y);
            true
        } else {
            false
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LbfgsStatus {
    /// Wolfe step accepted.
    Accepted,
    /// Line search failed; a steepest-descent step was taken instead.
    Fallback,
    /// No decrease found; parameters unchanged.
    Failed,
    /// Gradient is zero; parameters unchanged.
    Stationary,
    /// `max_failures` consecutive failures; the phase should end.
    Exhausted,
}

#[derive(Clone, Debug)]
pub struct LbfgsStep {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub status: LbfgsStatus,
    pub evaluations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn shifted(theta: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    theta.iter().zip(d).map(|(t, di)| t + a * di).collect()
}

/// Minimiser of the cubic interpolating two points with slopes, kept inside
/// the bracket; falls back to bisection.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if disc >= 0.0 {
        let d2 = disc.sqrt() * (b - a).signum();
        let x = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
        let margin = 0.1 * (hi - lo);
        if x.is_finite() && x > lo + margin && x < hi - margin {
            return x;
        }
    }
    0.5 * (lo + hi)
}

struct Probe {
    a: f64,
    f: f64,
    d: f64,
    g: Vec<f64>,
}

/// Strong Wolfe search along `d` (Nocedal and Wright, algorithms 3.5 and 3.6).
fn wolfe_search<F>(
    state: &LbfgsState,
    theta: &[f64],
    f0: f64,
    dphi0: f64,
    d: &[f64],
    a_init: f64,
    oracle: &mut F,
    evals: &mut usize,
) -> Result<Option<Probe>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut probe = |a: f64, evals: &mut usize| -> Result<Probe> {
        *evals += 1;
        let (f, g) = oracle(&shifted(theta, a, d))?;
        let dd = dot(&g, d);
        Ok(Probe { a, f, d: dd, g })
    };
    let mut prev = Probe {
        a: 0.0,
        f: f0,
        d: dphi0,
        g: vec![],
    };
    let mut a = a_init;
    let mut used = 0;
    let (c1, c2) = (state.c1, state.c2);
    let zoom = |mut lo: Probe, mut hi: Probe, used: &mut usize, evals: &mut usize, probe: &mut dyn FnMut(f64, &mut usize) -> Result<Probe>| -> Result<Option<Probe>> {
        while *used < state.max_line_search {
            let a = cubic_min(lo.a, lo.f, lo.d, hi.a, hi.f, hi.d);
            *used += 1;
            let p = probe(a, evals)?;
            if !p.f.is_finite() || p.f > f0 + c1 * a * dphi0 || p.f >= lo.f {
                hi = p;
            } else {
                if p.d.abs() <= -c2 * dphi0 {
                    return Ok(Some(p));
                }
                if p.d * (hi.a - lo.a) >= 0.0 {
                    hi = lo;
                }
                lo = p;
            }
            if (hi.a - lo.a).abs() < 1e-16 * lo.a.abs().max(1.0) {
                break;
            }
        }
        Ok(None)
    };
    while used < state.max_line_search {
        used += 1;
        let p = probe(a, evals)?;
        if !p.f.is_finite() || p.f > f0 + c1 * a * dphi0 || (used > 1 && p.f >= prev.f) {
            return zoom(prev, p, &mut used, evals, &mut probe);
        }
        if p.d.abs() <= -c2 * dphi0 {
            return Ok(Some(p));
        }
        if p.d >= 0.0 {
            return zoom(p, prev, &mut used, evals, &mut probe);
        }
        prev = p;
        a *= 2.0;
    }
    Ok(None)
}

/// One L-BFGS iteration from `theta` with known loss `f` and gradient `g`.
/// `theta` is updated in place unless the step fails.
pub fn lbfgs_step<F>(
    state: &mut LbfgsState,
    theta: &mut [f64],
    f: f64,
    g: &[f64],
    mut oracle: F,
) -> Result<LbfgsStep>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let gnorm = dot(g, g).sqrt();
    if gnorm == 0.0 {
        return Ok(LbfgsStep {
            loss: f,
            grad: g.to_vec(),
            status: LbfgsStatus::Stationary,
            evaluations: 0,
        });
    }
    let mut evals = 0;
    let mut d = state.direction(g);
    let mut dphi0 = dot(g, &d);
    if !(dphi0 < 0.0) {
        state.s.clear();
        state.y.clear();
        d = g.iter().map(|v| -v).collect();
        dphi0 = -gnorm * gnorm;
    }
    let a_init = if state.s.is_empty() {
        (1.0 / gnorm).min(1.0)
    } else {
        1.0
    };

    let found = wolfe_search(state, theta, f, dphi0, &d, a_init, &mut oracle, &mut evals)?;
    let (status, probe, dir) = match found {
        Some(p) => (LbfgsStatus::Accepted, Some(p), d),
        None => {
            // Steepest descent with halving trial steps.
            let sd: Vec<f64> = g.iter().map(|v| -v).collect();
            let mut a = 0.5 * state.last_step.min(1.0 / gnorm).max(1e-12);
            let mut best = None;
            for _ in 0..state.max_line_search {
                evals += 1;
                let (fa, ga) = oracle(&shifted(theta, a, &sd))?;
                if fa.is_finite() && fa < f {
                    best = Some(Probe {
                        a,
                        f: fa,
                        d: 0.0,
                        g: ga,
                    });
                    break;
                }
                a *= 0.5;
            }
            match best {
                Some(p) => (LbfgsStatus::Fallback, Some(p), sd),
                None => (LbfgsStatus::Failed, None, sd),
            }
        }
    };

    let Some(p) = probe else {
        state.failures += 1;
        let status = if state.failures >= state.max_failures {
            LbfgsStatus::Exhausted
        } else {
            status
        };
        return Ok(LbfgsStep {
            loss: f,
            grad: g.to_vec(),
            status,
            evaluations: evals,
        });
    };

    let s: Vec<f64> = dir.iter().map(|v| p.a * v).collect();
    let y: Vec<f64> = p.g.iter().zip(g).map(|(a, b)| a - b).collect();
    for (t, si) in theta.iter_mut().zip(&s) {
        *t += si;
    }
    state.push_pair(s, y);
    state.last_step = p.a;
    let status = if status == LbfgsStatus::Accepted {
        state.failures = 0;
        status
    } else {
        state.failures += 1;
        if state.failures >= state.max_failures {
            LbfgsStatus::Exhausted
        } else {
            status
        }
    };
    Ok(LbfgsStep {
        loss: p.f,
        grad: p.g,
        status,
        evaluations: evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn run<F>(theta: &mut Vec<f64>, mut f: F, iters: usize, tol: f64) -> usize
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    {
        let mut st = LbfgsState::default();
        let (mut l, mut g) = f(theta).unwrap();
        for k in 0..iters {
            if dot(&g, &g).sqrt() < tol {
                return k;
            }
            let step = lbfgs_step(&mut st, theta, l, &g, &mut f).unwrap();
            assert!(step.loss <= l);
            for (s, y) in st.pairs() {
                assert!(dot(s, y) > CURVATURE_EPS);
            }
            assert!(st.history_len() <= st.memory);
            l = step.loss;
            g = step.grad;
            if matches!(step.status, LbfgsStatus::Exhausted | LbfgsStatus::Stationary) {
                return k + 1;
            }
        }
        iters
    }

    #[test]
    fn spd_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 5;
        let b: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| b[k * n + i] * b[k * n + j]).sum::<f64>()
                    + if i == j { 0.5 } else { 0.0 };
            }
        }
        let f = |th: &[f64]| {
            let g: Vec<f64> = (0..n).map(|i| (0..n).map(|j| a[i * n + j] * th[j]).sum()).collect();
            Ok((0.5 * dot(th, &g), g))
        };
        let mut th: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let k = run(&mut th, f, 30, 1e-10);
        assert!(k < 30, "took {k}");
    }

    #[test]
    fn rosenbrock() {
        let f = |th: &[f64]| {
            let (x, y) = (th[0], th[1]);
            let v = (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2);
            let g = vec![
                -2.0 * (1.0 - x) - 400.0 * x * (y - x * x),
                200.0 * (y - x * x),
            ];
            Ok((v, g))
        };
        let mut th = vec![-1.2, 1.0];
        let k = run(&mut th, f, 200, 1e-12);
        assert!(k <= 200);
        assert!((th[0] - 1.0).abs() < 1e-6 && (th[1] - 1.0).abs() < 1e-6, "{th:?}");
    }

    #[test]
    fn stationary_point_is_fixed() {
        let mut st = LbfgsState::default();
        let mut th = vec![0.0, 0.0];
        let step = lbfgs_step(&mut st, &mut th, 0.0, &[0.0, 0.0], |_| {
            panic!("oracle must not be called")
        })
        .unwrap();
        assert_eq!(step.status, LbfgsStatus::Stationary);
        assert_eq!(th, vec![0.0, 0.0]);
    }

    #[test]
    fn repeated_failures_exhaust() {
        // Gradient that lies about the descent direction: every probe is worse.
        let mut st = LbfgsState::default();
        let mut th = vec![1.0];
        let mut last = LbfgsStatus::Accepted;
        for _ in 0..3 {
            let s = lbfgs_step(&mut st, &mut th, 0.0, &[1.0], |_| Ok((1.0, vec![1.0]))).unwrap();
            last = s.status;
        }
        assert_eq!(last, LbfgsStatus::Exhausted);
        assert_eq!(th, vec![1.0]);
    }
}
