use super::model::{Gradients, NetworkModel};
use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Nesterov-accelerated Adam with a constant learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Nadam {
    pub learning_rate: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl Nadam {
    pub fn new(model: &NetworkModel, learning_rate: f64) -> Result<Self> {
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        let shapes = model.param_shapes();
        Ok(Self {
            learning_rate,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        })
    }

    /// Number of updates applied so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// One update. Fails, leaving model and moments untouched, when any
    /// gradient is non-finite or the shapes disagree.
    pub fn update(&mut self, model: &mut NetworkModel, grads: &Gradients) -> Result<()> {
        if grads.params.len() != self.m.len() {
            return Err(Error::mismatch(
                format!("{} gradient tensors", self.m.len()),
                grads.params.len(),
            ));
        }
        for (i, (g, m)) in grads.params.iter().zip(&self.m).enumerate() {
            if g.len() != m.len() {
                return Err(Error::mismatch(format!("tensor {i} of {} values", m.len()), g.len()));
            }
            if let Some(j) = g.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("gradient tensor {i}[{j}] = {}", g[j])));
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let mu = self.learning_rate;
        let bc1_next = 1.0 - BETA1.powi(t + 1);
        let bc1 = 1.0 - BETA1.powi(t);
        let bc2 = 1.0 - BETA2.powi(t);

        let mut idx = 0;
        let (ms, vs) = (&mut self.m, &mut self.v);
        model.visit_params_mut(|params| {
            let g = &grads.params[idx];
            let m = &mut ms[idx];
            let v = &mut vs[idx];
            for j in 0..params.len() {
                let gj = g[j] as f64;
                m[j] = BETA1 * m[j] + (1.0 - BETA1) * gj;
                v[j] = BETA2 * v[j] + (1.0 - BETA2) * gj * gj;
                let m_hat = m[j] / bc1_next;
                let v_hat = v[j] / bc2;
                let dir = BETA1 * m_hat + (1.0 - BETA1) * gj / bc1;
                params[j] = (params[j] as f64 - mu * dir / (v_hat.sqrt() + EPSILON)) as f32;
            }
            idx += 1;
        });
        Ok(())
    }
}
