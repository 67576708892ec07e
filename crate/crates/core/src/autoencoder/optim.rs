use serde::{Deserialize, Serialize};

use super::model::Model;
use super::tensor::Tensor;
use super::ModelError;

/// Adam moments for every parameter buffer of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(model: &Model, learning_rate: f64) -> Self {
        let zeros: Vec<Vec<f64>> = model.parameters().iter().map(|p| vec![0.0; p.len()]).collect();
        Self { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, step: 0, m: zeros.clone(), v: zeros }
    }
}

/// One optimization step on `batch`; returns the pre-step loss.
pub fn backward_and_step(model: &mut Model, batch: &Tensor, state: &mut AdamState) -> Result<f64, ModelError> {
    let (loss, grads) = model.loss_and_gradients(batch)?;
    if !loss.is_finite() {
        return Err(ModelError::NonFiniteLoss { step: state.step + 1, loss });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);
    let lr = state.learning_rate;
    let eps = state.epsilon;
    for (((param, grad), m), v) in model
        .parameters_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for i in 0..param.len() {
            let g = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] / correction1;
            let v_hat = v[i] / correction2;
            param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(loss)
}
