//! Adaptive-moment parameter updates with per-block learning rates.

use crate::field::{BlockId, ParamVec};

/// Raised when a gradient contains non-finite values; the strategy layer
/// skips the step and counts it against the run's skip budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NonFiniteGradient;

/// Optimizer state: step count plus first/second moment accumulators aligned
/// with the parameter layout.
#[derive(Debug, Clone)]
pub struct OptimState {
    pub step: u64,
    pub m: ParamVec,
    pub v: ParamVec,
    /// Learning rate for grid tables and embeddings.
    pub lr_encoding: f64,
    /// Learning rate for decoder MLP weights.
    pub lr_decoder: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

pub const DEFAULT_LR_ENCODING: f64 = 1e-2;
pub const DEFAULT_LR_DECODER: f64 = 1e-3;

impl OptimState {
    pub fn new(params: &ParamVec, lr_encoding: f64, lr_decoder: f64) -> Self {
        OptimState {
            step: 0,
            m: ParamVec::zeros_like(params),
            v: ParamVec::zeros_like(params),
            lr_encoding,
            lr_decoder,
            beta1: 0.9,
            beta2: 0.99,
            epsilon: 1e-15,
        }
    }

    pub fn with_defaults(params: &ParamVec) -> Self {
        OptimState::new(params, DEFAULT_LR_ENCODING, DEFAULT_LR_DECODER)
    }

    /// One bias-corrected update. Moments grow with the parameter vector when
    /// embedding rows were appended since the last step. Fails without
    /// touching anything if the gradient is not finite.
    pub fn adam_step(
        &mut self,
        params: &mut ParamVec,
        grads: &ParamVec,
    ) -> Result<(), NonFiniteGradient> {
        if !grads.is_finite() {
            return Err(NonFiniteGradient);
        }
        self.m.grow_to_match(params);
        self.v.grow_to_match(params);
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for id in BlockId::ALL {
            let lr = if id.is_encoding() {
                self.lr_encoding
            } else {
                self.lr_decoder
            };
            let g = grads.block(id);
            let m = self.m.block_mut(id);
            for (mi, gi) in m.iter_mut().zip(g.iter()) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
            }
            let v = self.v.block_mut(id);
            for (vi, gi) in v.iter_mut().zip(g.iter()) {
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
            }
            let p = params.block_mut(id);
            let m = self.m.block(id);
            let v = self.v.block(id);
            for i in 0..p.len() {
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}
