use serde::{Deserialize, Serialize};

use super::param::{ParamTensor, Parameterized};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { alpha: 0.001, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0 && (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// Adam with bias correction. The moment estimates live in each
/// [`ParamTensor`]; this struct only tracks the step count.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    pub t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Adam { config, t: 0 })
    }

    /// Applies one update from the `grad` fields, then zeroes them.
    ///
    /// If any gradient is non-finite nothing is modified and the offending
    /// tensor is named in the error.
    pub fn step<M: Parameterized + ?Sized>(&mut self, model: &mut M) -> Result<()> {
        for (name, p) in model.named_params() {
            if !p.grad.all_finite() {
                return Err(Error::Numeric(format!("gradient of {name}")));
            }
        }
        let t = self.t + 1;
        let AdamConfig { alpha, beta1, beta2, epsilon } = self.config;
        let c1 = 1.0 - beta1.powi(t as i32);
        let c2 = 1.0 - beta2.powi(t as i32);
        for p in model.params_mut() {
            let ParamTensor { value, grad, adam_m, adam_v } = p;
            let moments = adam_m.data_mut().iter_mut().zip(adam_v.data_mut().iter_mut());
            for ((x, &g), (m, v)) in value.data_mut().iter_mut().zip(grad.data()).zip(moments) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *x -= alpha * m_hat / (v_hat.sqrt() + epsilon);
            }
            grad.fill(0.0);
        }
        self.t = t;
        Ok(())
    }
}
