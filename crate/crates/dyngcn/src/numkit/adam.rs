//! Adam optimizer over a named parameter set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{Gradients, Matrix, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..AdamConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid optimizer settings: lr={}, beta1={}, beta2={}, epsilon={}",
                self.lr, self.beta1, self.beta2, self.epsilon
            )))
        }
    }
}

/// First and second moment estimates, one pair per parameter, plus the step
/// counter used for bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    moments: Vec<(String, Matrix, Matrix)>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet) -> Self {
        let moments = params
            .iter()
            .map(|(n, m)| {
                (
                    n.to_string(),
                    Matrix::zeros(m.rows(), m.cols()),
                    Matrix::zeros(m.rows(), m.cols()),
                )
            })
            .collect();
        AdamState { moments, step: 0 }
    }
}

/// One Adam update over every parameter in `params`, in place.
///
/// Every parameter must have a matching gradient of identical shape; a
/// missing or misshapen gradient is a contract violation. Non-finite results
/// surface as numeric errors so callers can abort the epoch cleanly.
pub fn adam_step(
    params: &mut ParamSet,
    grads: &Gradients,
    state: &mut AdamState,
    config: &AdamConfig,
) -> Result<()> {
    config.validate()?;
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - config.beta1.powi(t);
    let bc2 = 1.0 - config.beta2.powi(t);

    for (name, param) in params.iter_mut() {
        let grad = grads.get(name).ok_or_else(|| {
            Error::Contract(format!("optimizer step: no gradient for parameter {name:?}"))
        })?;
        if grad.rows() != param.rows() || grad.cols() != param.cols() {
            return Err(Error::Dimension {
                op: format!("adam_step({name})"),
                lhs: (param.rows(), param.cols()),
                rhs: (grad.rows(), grad.cols()),
            });
        }
        let slot = state
            .moments
            .iter_mut()
            .find(|(n, _, _)| n == name)
            .ok_or_else(|| {
                Error::Contract(format!("optimizer step: no moment state for {name:?}"))
            })?;
        let (_, m, v) = slot;
        let pd = param.data_mut();
        let gd = grad.data();
        let md = m.data_mut();
        let vd = v.data_mut();
        for i in 0..pd.len() {
            let g = gd[i];
            md[i] = config.beta1 * md[i] + (1.0 - config.beta1) * g;
            vd[i] = config.beta2 * vd[i] + (1.0 - config.beta2) * g * g;
            let m_hat = md[i] / bc1;
            let v_hat = vd[i] / bc2;
            pd[i] -= config.lr * m_hat / (v_hat.sqrt() + config.epsilon);
        }
        param.check_finite(&format!("parameter {name} after optimizer step"))?;
    }
    Ok(())
}
