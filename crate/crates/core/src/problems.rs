//! Scaled simply supported beam problems and their closed-form solutions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::Jet;
use crate::error::{Error, Result};
use crate::network::AnalyticField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemId {
    P1,
    P2,
    P3,
}

impl ProblemId {
    pub const ALL: [ProblemId; 3] = [ProblemId::P1, ProblemId::P2, ProblemId::P3];

    pub fn name(&self) -> &'static str {
        match self {
            ProblemId::P1 => "p1",
            ProblemId::P2 => "p2",
            ProblemId::P3 => "p3",
        }
    }

    pub fn spec(&self) -> ProblemSpec {
        match self {
            ProblemId::P1 => p1(),
            ProblemId::P2 => p2(),
            ProblemId::P3 => p3(),
        }
    }
}

impl FromStr for ProblemId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p1" => Ok(ProblemId::P1),
            "p2" => Ok(ProblemId::P2),
            "p3" => Ok(ProblemId::P3),
            other => Err(Error::InvalidArgument(format!("unknown problem '{other}'"))),
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Unscaled beam data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalBeam {
    pub e: f64,
    pub i: f64,
    pub rho: f64,
    pub a: f64,
    pub k: f64,
}

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Scaled coefficients `(c^2, kappa, f)` of `c^2 u_xxxx + u_tt + kappa u = f`.
pub fn scale_physical(
    beam: &PhysicalBeam,
    load: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
) -> Result<(f64, f64, ScalarFn)> {
    let rho_a = beam.rho * beam.a;
    if !(rho_a > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rho * A must be positive, got {rho_a}"
        )));
    }
    if !(beam.e > 0.0 && beam.i > 0.0 && beam.k >= 0.0) {
        return Err(Error::InvalidArgument(
            "E and I must be positive and k non-negative".into(),
        ));
    }
    let f: ScalarFn = Arc::new(move |x, t| load(x, t) / rho_a);
    Ok((beam.e * beam.i / rho_a, beam.k / rho_a, f))
}

/// Separable mode `sin(k x) cos(w t)`; every problem's exact solution has this form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    pub k: f64,
    pub w: f64,
}

impl Mode {
    pub fn value(&self, x: f64, t: f64) -> f64 {
        (self.k * x).sin() * (self.w * t).cos()
    }

    /// `d^p/dx^p d^q/dt^q` of the mode.
    pub fn derivative(&self, x: f64, t: f64, p: u32, q: u32) -> f64 {
        let sx = match p % 4 {
            0 => (self.k * x).sin(),
            1 => (self.k * x).cos(),
            2 => -(self.k * x).sin(),
            _ => -(self.k * x).cos(),
        };
        let ct = match q % 4 {
            0 => (self.w * t).cos(),
            1 => -(self.w * t).sin(),
            2 => -(self.w * t).cos(),
            _ => (self.w * t).sin(),
        };
        self.k.powi(p as i32) * self.w.powi(q as i32) * sx * ct
    }

    pub fn jet(&self, x: &Jet, t: &Jet) -> Jet {
        (*x * self.k).sin() * (*t * self.w).cos()
    }
}

/// One of the three benchmark problems.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub id: ProblemId,
    pub x_domain: (f64, f64),
    pub t_domain: (f64, f64),
    pub c_sq: f64,
    pub kappa: f64,
    /// Coefficient `a` in `f = a sin(k x) cos(w t)`.
    pub forcing_amplitude: f64,
    pub mode: Mode,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.x_domain.0 < self.x_domain.1 && self.t_domain.0 < self.t_domain.1) {
            return Err(Error::InvalidArgument("empty domain".into()));
        }
        if !(self.c_sq > 0.0 && self.kappa >= 0.0) {
            return Err(Error::InvalidArgument("need c^2 > 0 and kappa >= 0".into()));
        }
        Ok(())
    }

    pub fn forcing(&self, x: f64, t: f64) -> f64 {
        self.forcing_amplitude * self.mode.value(x, t)
    }

    pub fn ic_phi(&self, x: f64) -> f64 {
        self.mode.value(x, 0.0)
    }

    pub fn ic_phi_t(&self, _x: f64) -> f64 {
        0.0
    }

    pub fn exact(&self, x: f64, t: f64) -> f64 {
        self.mode.value(x, t)
    }

    pub fn exact_derivative(&self, x: f64, t: f64, p: u32, q: u32) -> f64 {
        self.mode.derivative(x, t, p, q)
    }

    pub fn contains(&self, x: f64, t: f64) -> bool {
        x >= self.x_domain.0 && x <= self.x_domain.1 && t >= self.t_domain.0 && t <= self.t_domain.1
    }

    pub fn x_len(&self) -> f64 {
        self.x_domain.1 - self.x_domain.0
    }

    pub fn t_end(&self) -> f64 {
        self.t_domain.1
    }

    /// Exact displacement as a one-output jet field.
    pub fn exact_field(&self) -> AnalyticField {
        let m = self.mode;
        AnalyticField::new(1, move |x, t| vec![m.jet(x, t)])
    }

    /// Exact pair `(u, u_xx)` as a two-output jet field.
    pub fn exact_pair_field(&self) -> AnalyticField {
        let m = self.mode;
        AnalyticField::new(2, move |x, t| {
            let u = m.jet(x, t);
            vec![u, u * (-m.k * m.k)]
        })
    }
}

pub fn p1() -> ProblemSpec {
    ProblemSpec {
        id: ProblemId::P1,
        x_domain: (0.0, 1.0),
        t_domain: (0.0, 1.0),
        c_sq: 1.0,
        kappa: 0.0,
        forcing_amplitude: 0.0,
        mode: Mode { k: PI, w: PI * PI },
    }
}

pub fn p2() -> ProblemSpec {
    ProblemSpec {
        id: ProblemId::P2,
        x_domain: (0.0, PI),
        t_domain: (0.0, 1.0),
        c_sq: 1.0,
        kappa: 0.0,
        forcing_amplitude: 1.0 - 16.0 * PI * PI,
        mode: Mode { k: 1.0, w: 4.0 * PI },
    }
}

pub fn p3() -> ProblemSpec {
    ProblemSpec {
        id: ProblemId::P3,
        x_domain: (0.0, 3.0 * PI),
        t_domain: (0.0, 1.0),
        c_sq: 1.0,
        kappa: 1.0,
        forcing_amplitude: 2.0 - PI * PI,
        mode: Mode { k: 1.0, w: PI },
    }
}

/// `c^2 u_xxxx + u_tt + kappa u - f` on the exact solution.
pub fn residual_of_exact(problem: &ProblemSpec, x: f64, t: f64) -> f64 {
    let d = |p, q| problem.exact_derivative(x, t, p, q);
    problem.c_sq * d(4, 0) + d(0, 2) + problem.kappa * d(0, 0) - problem.forcing(x, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_beam_scaling() {
        let beam = PhysicalBeam {
            e: 1.0,
            i: 1.0,
            rho: 1.0,
            a: 1.0,
            k: 0.0,
        };
        let (c, k, f) = scale_physical(&beam, |_, _| 0.0).unwrap();
        assert_eq!((c, k, f(0.3, 0.1)), (1.0, 0.0, 0.0));
    }

    #[test]
    fn scaled_coefficients() {
        let beam = PhysicalBeam {
            e: 2.0,
            i: 3.0,
            rho: 1.0,
            a: 6.0,
            k: 12.0,
        };
        let (c, k, f) = scale_physical(&beam, |_, _| 6.0).unwrap();
        assert_eq!(c, 1.0);
        assert_eq!(k, 2.0);
        assert_eq!(f(0.2, 0.7), 1.0);
    }

    #[test]
    fn non_positive_mass_rejected() {
        let beam = PhysicalBeam {
            e: 1.0,
            i: 1.0,
            rho: 0.0,
            a: 1.0,
            k: 0.0,
        };
        assert!(scale_physical(&beam, |_, _| 0.0).is_err());
    }

    #[test]
    fn tabulated_ground_truth() {
        let r6 = |v: f64| (v * 1e6).round() / 1e6;
        assert_eq!(r6(p1().exact(0.5, 0.5)), 0.220584);
        assert_eq!(r6(p1().exact(0.5, 0.9)), -0.856610);
        assert_eq!(r6(p2().exact(PI / 2.0, 0.4)), 0.309017);
        assert_eq!(r6(p2().exact(PI / 2.0, 0.8)), -0.809017);
        assert_eq!(r6(p3().exact(1.5 * PI, 0.3)), -0.587785);
        assert_eq!(r6(p3().exact(1.5 * PI, 0.9)), 0.951057);
    }

    #[test]
    fn boundaries_and_initial_line() {
        for p in [p1(), p2(), p3()] {
            for k in 0..100 {
                let t = k as f64 / 99.0;
                let (a, b) = p.x_domain;
                for x in [a, b] {
                    assert!(p.exact(x, t).abs() < 1e-9);
                    assert!(p.exact_derivative(x, t, 2, 0).abs() < 1e-9);
                }
            }
            for k in 0..=100 {
                let x = p.x_domain.0 + p.x_len() * k as f64 / 100.0;
                assert!((p.exact(x, 0.0) - p.ic_phi(x)).abs() < 1e-12);
                assert_eq!(p.exact_derivative(x, 0.0, 0, 1).abs(), p.ic_phi_t(x));
            }
        }
    }

    #[test]
    fn exact_residuals_vanish() {
        assert!(residual_of_exact(&p1(), 0.3, 0.7).abs() < 1e-10);
        assert!(residual_of_exact(&p2(), 1.0, 0.25).abs() < 1e-10);
        assert!(residual_of_exact(&p3(), 5.0, 0.5).abs() < 1e-10);
    }

    #[test]
    fn mode_derivatives_match_jets() {
        let m = p2().mode;
        let (x, t) = (0.8, 0.13);
        let jx = m.jet(&Jet::variable(x, 4), &Jet::constant(t, 4));
        for p in 0..=4 {
            let a = m.derivative(x, t, p, 0);
            assert!((jx.derivative(p as usize) - a).abs() < 1e-10 * a.abs().max(1.0));
        }
    }
}
