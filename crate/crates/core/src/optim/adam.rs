use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam update of `params` in place with learning rate `lr`.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
    assert_eq!(params.len(), grad.len());
    assert_eq!(state.m.len(), grad.len());
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient(i));
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params[i] -= lr * mh / (vh.sqrt() + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut s = AdamState::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        adam_step(&mut s, &mut p, &[0.0; 3], 1e-3).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        let mut s = AdamState::new(1);
        let mut p = vec![0.0];
        let lr = 0.01;
        let mut last = 0.0;
        for _ in 0..5000 {
            let before = p[0];
            adam_step(&mut s, &mut p, &[3.7], lr).unwrap();
            last = (p[0] - before).abs();
        }
        assert!((last - lr).abs() < 1e-6 * lr + 1e-10, "{last}");
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut s = AdamState::new(2);
        let mut p = vec![0.0; 2];
        assert!(matches!(
            adam_step(&mut s, &mut p, &[0.0, f64::NAN], 1e-3),
            Err(Error::NonFiniteGradient(1))
        ));
    }

    #[test]
    fn deterministic_trajectory() {
        let run = || {
            let mut s = AdamState::new(2);
            let mut p = vec![0.3, -0.1];
            for k in 0..50 {
                let g = [p[0] * 2.0 + k as f64 * 0.01, (p[1] - 1.0).sin()];
                adam_step(&mut s, &mut p, &g, 1e-2).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
