use super::{ModelError, ToyFcn};

/// Stochastic gradient descent hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimParams {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
}

impl Default for OptimParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 0.0005,
            batch_size: 10,
        }
    }
}

impl OptimParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(format!("weight decay must be non-negative, got {}", self.weight_decay));
        }
        if self.batch_size == 0 {
            return Err("batch size must be positive".into());
        }
        Ok(())
    }
}

/// Hyperparameters plus the momentum buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub params: OptimParams,
    velocity: Vec<f64>,
}

impl OptimState {
    pub fn new(params: OptimParams, model: &ToyFcn) -> Result<Self, ModelError> {
        params.validate().map_err(ModelError::InvalidOptim)?;
        Ok(Self {
            params,
            velocity: vec![0.0; model.params().len()],
        })
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }
}

/// `v <- momentum * v + grad + decay * w; w <- w - lr * v`.
pub fn sgd_step(model: &mut ToyFcn, grads: &[f64], opt: &mut OptimState) -> Result<(), ModelError> {
    let n = model.params().len();
    if grads.len() != n || opt.velocity.len() != n {
        return Err(ModelError::ParamCount {
            expected: n,
            actual: if grads.len() != n {
                grads.len()
            } else {
                opt.velocity.len()
            },
        });
    }
    let OptimParams {
        learning_rate,
        momentum,
        weight_decay,
        ..
    } = opt.params;
    for ((w, v), &g) in model.params_mut().iter_mut().zip(&mut opt.velocity).zip(grads) {
        *v = momentum * *v + g + weight_decay * *w;
        *w -= learning_rate * *v;
    }
    Ok(())
}
