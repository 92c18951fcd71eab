//! Truncated univariate Taylor polynomials.
//!
//! A [`Jet`] of order `K` stores `coeffs[k] = w^(k)(s0) / k!` for one seeded
//! input direction `s`. Arithmetic is exact truncated-polynomial algebra, so
//! pushing a seeded jet through a program yields every derivative up to `K`
//! along that direction in a single forward sweep.

use std::ops::{Add, Mul, Neg, Sub};

/// Highest supported truncation order.
pub const MAX_ORDER: usize = 4;

const FACTORIAL: [f64; MAX_ORDER + 1] = [1.0, 1.0, 2.0, 6.0, 24.0];

/// `k!` for `k <= MAX_ORDER`.
pub fn factorial(k: usize) -> f64 {
    FACTORIAL[k]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    coeffs: [f64; MAX_ORDER + 1],
    order: usize,
}

impl Jet {
    /// Builds a jet from its Taylor coefficients; the order is `coeffs.len() - 1`.
    pub fn from_coeffs(coeffs: &[f64]) -> Self {
        assert!(
            !coeffs.is_empty() && coeffs.len() <= MAX_ORDER + 1,
            "jet needs between 1 and {} coefficients",
            MAX_ORDER + 1
        );
        let mut c = [0.0; MAX_ORDER + 1];
        c[..coeffs.len()].copy_from_slice(coeffs);
        Jet {
            coeffs: c,
            order: coeffs.len() - 1,
        }
    }

    /// Lifts a constant: `(c, 0, ..., 0)`.
    pub fn constant(c: f64, order: usize) -> Self {
        assert!(order <= MAX_ORDER);
        let mut coeffs = [0.0; MAX_ORDER + 1];
        coeffs[0] = c;
        Jet { coeffs, order }
    }

    /// Lifts the seeded variable: `(s0, 1, 0, ..., 0)`.
    pub fn variable(s0: f64, order: usize) -> Self {
        let mut j = Self::constant(s0, order);
        if order >= 1 {
            j.coeffs[1] = 1.0;
        }
        j
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs[..=self.order]
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `k`-th derivative along the seeded direction, i.e. `coeffs[k] * k!`.
    pub fn derivative(&self, k: usize) -> f64 {
        assert!(k <= self.order, "derivative {k} above jet order {}", self.order);
        self.coeffs[k] * FACTORIAL[k]
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = *self;
        for v in &mut out.coeffs[..=self.order] {
            *v *= c;
        }
        out
    }

    pub fn add_scalar(&self, c: f64) -> Self {
        let mut out = *self;
        out.coeffs[0] += c;
        out
    }

    fn check_order(&self, other: &Jet) {
        assert_eq!(
            self.order, other.order,
            "jet order mismatch: {} vs {}",
            self.order, other.order
        );
    }

    /// Cauchy product truncated at the common order.
    pub fn mul_jet(&self, other: &Jet) -> Self {
        self.check_order(other);
        let mut out = Jet::constant(0.0, self.order);
        for k in 0..=self.order {
            let mut acc = 0.0;
            for i in 0..=k {
                acc += self.coeffs[i] * other.coeffs[k - i];
            }
            out.coeffs[k] = acc;
        }
        out
    }

    /// Multiplicative inverse by the recursion `b_k = -(sum_{i=1..k} a_i b_{k-i}) / a_0`.
    pub fn recip(&self) -> Self {
        let a0 = self.coeffs[0];
        let mut out = Jet::constant(1.0 / a0, self.order);
        for k in 1..=self.order {
            let mut acc = 0.0;
            for i in 1..=k {
                acc += self.coeffs[i] * out.coeffs[k - i];
            }
            out.coeffs[k] = -acc / a0;
        }
        out
    }

    pub fn div_jet(&self, other: &Jet) -> Self {
        self.mul_jet(&other.recip())
    }

    /// `tanh` via the Faa di Bruno recursion driven by `tanh' = 1 - tanh^2`:
    /// with `y = tanh(a)` and `z = 1 - y^2`, `k y_k = sum_{j=1..k} j a_j z_{k-j}`.
    pub fn tanh(&self) -> Self {
        let n = self.order;
        let a = &self.coeffs;
        let mut y = [0.0; MAX_ORDER + 1];
        let mut z = [0.0; MAX_ORDER + 1];
        y[0] = a[0].tanh();
        z[0] = 1.0 - y[0] * y[0];
        for k in 1..=n {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * a[j] * z[k - j];
            }
            y[k] = acc / k as f64;
            let mut sq = 0.0;
            for i in 0..=k {
                sq += y[i] * y[k - i];
            }
            z[k] = -sq;
        }
        Jet { coeffs: y, order: n }
    }

    /// Simultaneous `(sin a, cos a)` by the coupled recursion
    /// `k s_k = sum j a_j c_{k-j}`, `k c_k = -sum j a_j s_{k-j}`.
    pub fn sin_cos(&self) -> (Self, Self) {
        let n = self.order;
        let a = &self.coeffs;
        let mut s = [0.0; MAX_ORDER + 1];
        let mut c = [0.0; MAX_ORDER + 1];
        s[0] = a[0].sin();
        c[0] = a[0].cos();
        for k in 1..=n {
            let mut ss = 0.0;
            let mut cc = 0.0;
            for j in 1..=k {
                ss += j as f64 * a[j] * c[k - j];
                cc -= j as f64 * a[j] * s[k - j];
            }
            s[k] = ss / k as f64;
            c[k] = cc / k as f64;
        }
        (Jet { coeffs: s, order: n }, Jet { coeffs: c, order: n })
    }

    pub fn sin(&self) -> Self {
        self.sin_cos().0
    }

    pub fn cos(&self) -> Self {
        self.sin_cos().1
    }
}

/// Free-function form of [`Jet::tanh`].
pub fn jet_tanh(a: &Jet) -> Jet {
    a.tanh()
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        self.check_order(&rhs);
        let mut out = self;
        for k in 0..=self.order {
            out.coeffs[k] += rhs.coeffs[k];
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self + (-rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_jet(&rhs)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.add_scalar(rhs)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self.add_scalar(-rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs.scale(self)
    }
}
