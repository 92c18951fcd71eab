//! Explicit finite differences: five-point fourth derivative in space,
//! leapfrog in time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{ProblemId, ProblemSpec};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dx: f64,
    pub dt: f64,
    pub nx: usize,
    /// Time levels, including `t = 0`.
    pub nt: usize,
    pub x_min: f64,
    pub t_min: f64,
}

/// Default number of spatial nodes (spacing of the comparison tables).
pub const DEFAULT_NX: usize = 11;

impl Grid {
    /// Uniform grid with `nx` nodes and a time step no larger than `dt`
    /// (default `dx^2 / 4`), shrunk so that a whole number of steps spans the
    /// time domain exactly.
    pub fn new(problem: &ProblemSpec, nx: usize, dt: Option<f64>) -> Result<Grid> {
        if nx < 5 {
            return Err(Error::InvalidArgument(format!(
                "the fourth-derivative stencil needs nx >= 5, got {nx}"
            )));
        }
        let dx = problem.x_len() / (nx - 1) as f64;
        let dt = dt.unwrap_or(dx * dx / 4.0);
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let span = problem.t_domain.1 - problem.t_domain.0;
        let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
        Ok(Grid {
            dx,
            dt: span / steps as f64,
            nx,
            nt: steps + 1,
            x_min: problem.x_domain.0,
            t_min: problem.t_domain.0,
        })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn t(&self, j: usize) -> f64 {
        self.t_min + j as f64 * self.dt
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.nx - 1)
    }

    pub fn t_max(&self) -> f64 {
        self.t(self.nt - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    /// `nt x nx`, row-major by time level.
    pub values: Vec<f64>,
    pub grid: Grid,
    pub problem: ProblemId,
}

impl GridSolution {
    pub fn at(&self, j: usize, i: usize) -> f64 {
        self.values[j * self.grid.nx + i]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.grid.nx..(j + 1) * self.grid.nx]
    }
}

/// `dx^2 / (2 sqrt(c^2))`: leapfrog bound for `u_tt = -c^2 u_xxxx` with the
/// spatial symbol bounded by `16 c^2 / dx^4`.
pub fn stability_limit(dx: f64, c_sq: f64) -> f64 {
    dx * dx / (2.0 * c_sq.sqrt())
}

/// Five-point fourth difference with simply supported ghost points; the
/// end entries are left at zero.
pub fn d4(u: &[f64], dx: f64, out: &mut [f64]) {
    let n = u.len();
    let at = |i: isize| -> f64 {
        if i < 0 {
            -u[(-i) as usize]
        } else if i as usize >= n {
            -u[2 * (n - 1) - i as usize]
        } else {
            u[i as usize]
        }
    };
    let h4 = dx.powi(4);
    out[0] = 0.0;
    out[n - 1] = 0.0;
    for i in 1..n - 1 {
        let i = i as isize;
        out[i as usize] =
            (at(i - 2) - 4.0 * at(i - 1) + 6.0 * at(i) - 4.0 * at(i + 1) + at(i + 2)) / h4;
    }
}

/// Solves on `grid`, rejecting steps above [`stability_limit`].
pub fn solve_fdm(problem: &ProblemSpec, grid: &Grid) -> Result<GridSolution> {
    let limit = stability_limit(grid.dx, problem.c_sq);
    if grid.dt > limit {
        return Err(Error::StepTooLarge { dt: grid.dt, limit });
    }
    solve_fdm_unchecked(problem, grid)
}

/// Like [`solve_fdm`] without the step-size check; growth beyond ten times the
/// initial amplitude (plus the forcing's reach) is reported as instability.
pub fn solve_fdm_unchecked(problem: &ProblemSpec, grid: &Grid) -> Result<GridSolution> {
    let nx = grid.nx;
    if nx < 5 {
        return Err(Error::InvalidArgument("nx must be at least 5".into()));
    }
    let (c2, kappa, dt) = (problem.c_sq, problem.kappa, grid.dt);
    let xs: Vec<f64> = (0..nx).map(|i| grid.x(i)).collect();
    let mut values = Vec::with_capacity(nx * grid.nt);

    let mut u0: Vec<f64> = xs.iter().map(|&x| problem.ic_phi(x)).collect();
    u0[0] = 0.0;
    u0[nx - 1] = 0.0;
    let phi_max = u0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let span = grid.t_max() - grid.t_min;
    let f_max = problem.forcing_amplitude.abs();
    let bound = 10.0 * (phi_max + f_max * span * span);
    values.extend_from_slice(&u0);
    if grid.nt == 1 {
        return Ok(GridSolution {
            values,
            grid: *grid,
            problem: problem.id,
        });
    }

    let mut lap = vec![0.0; nx];
    let accel = |u: &[f64], t: f64, lap: &mut [f64], i: usize| -> f64 {
        problem.forcing(xs[i], t) - c2 * lap[i] - kappa * u[i]
    };

    d4(&u0, grid.dx, &mut lap);
    let mut u1 = vec![0.0; nx];
    for i in 1..nx - 1 {
        u1[i] = u0[i] + dt * problem.ic_phi_t(xs[i]) + 0.5 * dt * dt * accel(&u0, grid.t(0), &mut lap, i);
    }
    values.extend_from_slice(&u1);

    let (mut prev, mut cur) = (u0, u1);
    let mut next = vec![0.0; nx];
    for j in 1..grid.nt - 1 {
        d4(&cur, grid.dx, &mut lap);
        let t = grid.t(j);
        for i in 1..nx - 1 {
            next[i] = 2.0 * cur[i] - prev[i] + dt * dt * accel(&cur, t, &mut lap, i);
        }
        let max_abs = next.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !max_abs.is_finite() || max_abs > bound {
            return Err(Error::Unstable {
                level: j + 1,
                max_abs,
            });
        }
        values.extend_from_slice(&next);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(GridSolution {
        values,
        grid: *grid,
        problem: problem.id,
    })
}

/// Bilinear interpolation of the stored field.
pub fn sample_solution(sol: &GridSolution, x: f64, t: f64) -> Result<f64> {
    let g = &sol.grid;
    let tol = 1e-12;
    if !(x >= g.x_min - tol && x <= g.x_max() + tol && t >= g.t_min - tol && t <= g.t_max() + tol) {
        return Err(Error::OutOfBounds { x, t });
    }
    let fx = ((x - g.x_min) / g.dx).clamp(0.0, (g.nx - 1) as f64);
    let ft = ((t - g.t_min) / g.dt).clamp(0.0, (g.nt - 1) as f64);
    let i = (fx.floor() as usize).min(g.nx - 2);
    let j = (ft.floor() as usize).min(g.nt.saturating_sub(2));
    let (a, b) = (fx - i as f64, ft - j as f64);
    if g.nt == 1 {
        return Ok((1.0 - a) * sol.at(0, i) + a * sol.at(0, i + 1));
    }
    let v00 = sol.at(j, i);
    let v01 = sol.at(j, i + 1);
    let v10 = sol.at(j + 1, i);
    let v11 = sol.at(j + 1, i + 1);
    Ok((1.0 - b) * ((1.0 - a) * v00 + a * v01) + b * ((1.0 - a) * v10 + a * v11))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{p1, p2, p3, Mode};
    use std::f64::consts::PI;

    #[test]
    fn stability_limit_scaling() {
        assert!((stability_limit(0.1, 1.0) - 0.005).abs() < 1e-15);
        assert!((stability_limit(0.1, 4.0) - 0.0025).abs() < 1e-15);
        assert!((stability_limit(0.05, 1.0) - 0.00125).abs() < 1e-15);
    }

    #[test]
    fn quartic_is_differenced_exactly() {
        let dx = 0.1;
        let u: Vec<f64> = (0..11).map(|i| (i as f64 * dx).powi(4)).collect();
        let mut out = vec![0.0; 11];
        d4(&u, dx, &mut out);
        for v in &out[2..9] {
            assert!((v - 24.0).abs() < 1e-8, "{v}");
        }
    }

    #[test]
    fn default_grid_matches_table_spacing() {
        let g = Grid::new(&p1(), DEFAULT_NX, None).unwrap();
        assert!((g.dx - 0.1).abs() < 1e-15);
        assert!((g.dt - 0.0025).abs() < 1e-15);
        assert_eq!(g.nt, 401);
        assert!((g.t_max() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn boundaries_pinned_and_first_row_is_phi() {
        for p in [p1(), p2(), p3()] {
            let g = Grid::new(&p, 11, None).unwrap();
            let s = solve_fdm(&p, &g).unwrap();
            for j in 0..g.nt {
                assert_eq!(s.at(j, 0), 0.0);
                assert_eq!(s.at(j, g.nx - 1), 0.0);
            }
            for i in 1..g.nx - 1 {
                assert_eq!(s.at(0, i), p.ic_phi(g.x(i)));
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let mut p = p1();
        p.mode = Mode { k: 0.0, w: 1.0 };
        let g = Grid::new(&p, 11, None).unwrap();
        let s = solve_fdm(&p, &g).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
    }

    // On P1 the grid data is a discrete eigenvector of the stencil, so the
    // scheme reproduces sin(pi x) cos(j theta) with cos(theta) = 1 - dt^2 lambda / 2.
    #[test]
    fn discrete_dispersion_oracle() {
        let p = p1();
        let g = Grid::new(&p, 11, None).unwrap();
        let s = solve_fdm(&p, &g).unwrap();
        let lambda = 16.0 * (PI * g.dx / 2.0).sin().powi(4) / g.dx.powi(4);
        let theta = (1.0 - 0.5 * g.dt * g.dt * lambda).acos();
        for j in [0, 1, 57, 200, 400] {
            for i in 0..g.nx {
                let want = (PI * g.x(i)).sin() * (j as f64 * theta).cos();
                assert!((s.at(j, i) - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn second_order_in_space() {
        let p = p1();
        let errs: Vec<f64> = [10usize, 20, 40]
            .iter()
            .map(|&m| {
                let g = Grid::new(&p, m + 1, None).unwrap();
                let s = solve_fdm(&p, &g).unwrap();
                (0..g.nx)
                    .map(|i| (sample_solution(&s, g.x(i), 0.25).unwrap() - p.exact(g.x(i), 0.25)).abs())
                    .fold(0.0, f64::max)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 2.0).abs() < 0.3, "{errs:?}");
        }
    }

    #[test]
    fn stable_below_and_unstable_above_the_limit() {
        let p = p1();
        let lim = stability_limit(0.1, 1.0);
        let g = Grid::new(&p, 11, Some(0.0049)).unwrap();
        assert!(solve_fdm(&p, &g).is_ok());
        let g = Grid::new(&p, 11, Some(1.05 * lim)).unwrap();
        assert!(matches!(solve_fdm(&p, &g), Err(Error::StepTooLarge { .. })));
        assert!(matches!(solve_fdm_unchecked(&p, &g), Err(Error::Unstable { .. })));
    }

    #[test]
    fn amplitude_stays_bounded() {
        let p = p1();
        let g = Grid::new(&p, 11, Some(0.8 * stability_limit(0.1, 1.0))).unwrap();
        let s = solve_fdm(&p, &g).unwrap();
        assert!(s.values.iter().all(|v| v.abs() <= 1.05));
    }

    #[test]
    fn bilinear_sampling() {
        let g = Grid {
            dx: 1.0,
            dt: 1.0,
            nx: 5,
            nt: 2,
            x_min: 0.0,
            t_min: 0.0,
        };
        let mut s = GridSolution {
            values: vec![0.0, 1.0, 2.0, 3.0, 4.0, 0.0, 1.0, 2.0, 3.0, 4.0],
            grid: g,
            problem: ProblemId::P1,
        };
        assert_eq!(sample_solution(&s, 2.0, 1.0).unwrap(), 2.0);
        assert_eq!(sample_solution(&s, 0.5, 0.0).unwrap(), 0.5);
        s.values = vec![7.0; 10];
        assert_eq!(sample_solution(&s, 1.5, 0.5).unwrap(), 7.0);
        assert!(matches!(
            sample_solution(&s, 4.5, 0.0),
            Err(Error::OutOfBounds { .. })
        ));
    }
}
