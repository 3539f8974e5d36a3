//! Adam with bias correction.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::num::sqrt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of steps taken so far.
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }
}

/// One Adam update of `params` in place; advances `state.t`.
///
/// A non-finite gradient aborts before anything is modified.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(domain("Adam parameter, gradient and state sizes differ"));
    }
    if let Some((index, &value)) = grads.iter().enumerate().find(|(_, g)| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { index, value });
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - libm::pow(cfg.beta1, t as f64);
    let bc2 = 1.0 - libm::pow(cfg.beta2, t as f64);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (sqrt(v_hat) + cfg.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = [0.3, -0.2];
        let mut st = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut st, &AdamConfig::default()).unwrap();
        assert_eq!(p, [0.3, -0.2]);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut p = [0.3, -0.2];
        let mut st = AdamState::new(2);
        let err = adam_step(&mut p, &[0.1, f64::NAN], &mut st, &AdamConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { index: 1, .. }));
        assert_eq!(p, [0.3, -0.2]);
        assert_eq!(st.t, 0);
    }
}
