use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::layers::{Gradients, Network, ParamId};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub const EPSILON: f64 = 1e-8;

    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Self { lr, beta1, beta2, epsilon: Self::EPSILON }
    }
}

/// First and second moments for one parameter tensor.
#[derive(Clone, Debug)]
pub struct Moments<T> {
    pub first: Vec<T>,
    pub second: Vec<T>,
}

impl<T: Scalar> Moments<T> {
    pub fn zeros(n: usize) -> Self {
        Self { first: vec![T::zero(); n], second: vec![T::zero(); n] }
    }
}

/// One bias-corrected Adam update of `param` in place. `step` is 1-based.
pub fn adam_update<T: Scalar>(
    param: &mut [T],
    grad: &[T],
    moments: &mut Moments<T>,
    step: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    if param.len() != grad.len() || moments.first.len() != grad.len() {
        return Err(Error::shape(format!(
            "adam: parameter has {} entries, gradient {}",
            param.len(),
            grad.len()
        )));
    }
    let b1 = T::from_f64_lossy(cfg.beta1);
    let b2 = T::from_f64_lossy(cfg.beta2);
    let one = T::one();
    let c1 = T::from_f64_lossy(1.0 - cfg.beta1.powi(step as i32));
    let c2 = T::from_f64_lossy(1.0 - cfg.beta2.powi(step as i32));
    let lr = T::from_f64_lossy(cfg.lr);
    let eps = T::from_f64_lossy(cfg.epsilon);
    for i in 0..param.len() {
        let g = grad[i];
        let m = b1 * moments.first[i] + (one - b1) * g;
        let v = b2 * moments.second[i] + (one - b2) * g * g;
        moments.first[i] = m;
        moments.second[i] = v;
        let mhat = m / c1;
        let vhat = v / c2;
        param[i] -= lr * mhat / (vhat.sqrt() + eps);
    }
    Ok(())
}

/// Adam over every trainable parameter of a network.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    moments: BTreeMap<ParamId, Moments<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, step: 0, moments: BTreeMap::new() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    pub fn moments(&self, id: ParamId) -> Option<&Moments<T>> {
        self.moments.get(&id)
    }

    /// Applies `grads` to `net`. Gradients for frozen parameters are refused.
    pub fn step(&mut self, net: &mut Network<T>, grads: &Gradients<T>) -> Result<()> {
        for g in &grads.params {
            if !net.is_trainable(g.id) {
                return Err(Error::param(format!(
                    "gradient supplied for frozen parameter {} of layer {}",
                    g.id.name, g.id.layer
                )));
            }
        }
        self.step += 1;
        for g in &grads.params {
            let param = net
                .param_mut(g.id)
                .ok_or_else(|| Error::param(format!("no parameter {:?}", g.id)))?;
            let m = self.moments.entry(g.id).or_insert_with(|| Moments::zeros(param.len()));
            adam_update(param, &g.values, m, self.step, &self.config)?;
        }
        Ok(())
    }
}
