//! Rectified Adam.

use serde::{Deserialize, Serialize};

/// Moment estimates and step counter for [`radam_step`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Number of updates applied so far.
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl RadamState {
    pub fn new(len: usize) -> Self {
        RadamState { beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: vec![0.0; len], v: vec![0.0; len] }
    }

    /// Length of the approximated simple moving average, `rho_inf`.
    fn rho_inf(&self) -> f64 {
        2.0 / (1.0 - self.beta2) - 1.0
    }

    /// Variance rectification factor for step `t`, or `None` while the
    /// adaptive learning rate is intractable (`rho_t <= 4`).
    pub fn rectification(&self, t: u64) -> Option<f64> {
        let rho_inf = self.rho_inf();
        let beta2_t = self.beta2.powf(t as f64);
        let rho_t = rho_inf - 2.0 * t as f64 * beta2_t / (1.0 - beta2_t);
        (rho_t > 4.0).then(|| {
            (((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t)).sqrt()
        })
    }
}

/// One RAdam update of `params` in place.
///
/// Early steps use bias-corrected momentum only; once the variance of the
/// adaptive rate is tractable the rectified adaptive step takes over.
pub fn radam_step(params: &mut [f64], grads: &[f64], state: &mut RadamState, lr: f64) {
    assert_eq!(params.len(), grads.len(), "parameter/gradient length mismatch");
    assert_eq!(params.len(), state.m.len(), "optimizer state length mismatch");
    state.step += 1;
    let t = state.step;
    let (b1, b2) = (state.beta1, state.beta2);
    let bias1 = 1.0 - b1.powf(t as f64);
    let bias2 = 1.0 - b2.powf(t as f64);
    let rect = state.rectification(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / bias1;
        match rect {
            Some(r) => {
                let v_hat = (state.v[i] / bias2).sqrt();
                params[i] -= lr * r * m_hat / (v_hat + state.eps);
            }
            None => params[i] -= lr * m_hat,
        }
    }
}
