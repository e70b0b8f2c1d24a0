//! Named parameter storage with gradient slots and Adam state.

use std::collections::BTreeMap;

use super::Tensor;
use crate::error::{Error, Result};

/// One named parameter: its value, gradient accumulator and Adam moments.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
    moment1: Tensor,
    moment2: Tensor,
}

impl Param {
    fn new(value: Tensor) -> Self {
        let (r, c) = value.shape();
        Param {
            grad: Tensor::zeros(r, c),
            moment1: Tensor::zeros(r, c),
            moment2: Tensor::zeros(r, c),
            value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Ordered name -> parameter map. BTreeMap keeps iteration (and so checkpoint
/// bytes and update order) deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) {
        self.params.insert(name.to_string(), Param::new(value));
    }

    pub fn get(&self, name: &str) -> Result<&Param> {
        self.params
            .get(name)
            .ok_or_else(|| Error::UnknownParam(name.to_string()))
    }

    pub fn value(&self, name: &str) -> Result<&Tensor> {
        Ok(&self.get(name)?.value)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Total scalar parameter count.
    pub fn total_parameters(&self) -> usize {
        self.params.values().map(|p| p.value.data().len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params.values_mut() {
            p.grad.data_mut().fill(0.0);
        }
    }

    pub(crate) fn accumulate_grad(&mut self, name: &str, grad: &Tensor) -> Result<()> {
        let p = self
            .params
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParam(name.to_string()))?;
        if p.grad.shape() != grad.shape() {
            return Err(Error::dim(
                "accumulate_grad",
                format!(
                    "gradient shape {:?} vs parameter shape {:?} for `{name}`",
                    grad.shape(),
                    p.grad.shape()
                ),
            ));
        }
        p.grad.add_assign(grad);
        Ok(())
    }

    /// Overwrite values from another store (used to restore checkpoints); shapes
    /// must match, optimizer state is reset.
    pub fn load_values(&mut self, other: &ParamStore) -> Result<()> {
        for (name, src) in other.iter() {
            let dst = self
                .params
                .get_mut(name)
                .ok_or_else(|| Error::UnknownParam(name.to_string()))?;
            if dst.value.shape() != src.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "shape mismatch for `{name}`: {:?} vs {:?}",
                    src.value.shape(),
                    dst.value.shape()
                )));
            }
            *dst = Param::new(src.value.clone());
        }
        self.step = 0;
        Ok(())
    }

    /// One Adam update over every parameter from its accumulated gradient.
    pub fn adam_step(&mut self, config: &AdamConfig) {
        self.adam_step_filtered(config, |_| true);
    }

    /// Adam update restricted to parameters the filter admits. Excluded parameters
    /// keep value *and* moments untouched, so freezing a subsystem mid-run does not
    /// let stale momentum drift it.
    pub fn adam_step_filtered(&mut self, config: &AdamConfig, mut include: impl FnMut(&str) -> bool) {
        self.step += 1;
        let t = self.step as f64;
        let bias1 = 1.0 - config.beta1.powf(t);
        let bias2 = 1.0 - config.beta2.powf(t);
        for (name, p) in self.params.iter_mut() {
            if !include(name) {
                continue;
            }
            let g = p.grad.data();
            let m = p.moment1.data_mut();
            let v = p.moment2.data_mut();
            let x = p.value.data_mut();
            for i in 0..g.len() {
                m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
                v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                x[i] -= config.lr * m_hat / (v_hat.sqrt() + config.epsilon);
            }
            debug_assert!(p.value.all_finite(), "non-finite parameter after adam step");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::from_vec(1, 3, vec![1.0, -2.0, 3.0]));
        let before = store.value("w").unwrap().clone();
        store.adam_step(&AdamConfig::with_lr(0.1));
        assert_eq!(store.value("w").unwrap(), &before);
    }

    #[test]
    fn first_step_with_unit_gradient_moves_by_about_lr() {
        // bias-corrected first step: m_hat = 1, v_hat = 1, delta = lr / (1 + eps)
        let mut store = ParamStore::new();
        store.insert("w", Tensor::scalar(0.5));
        store
            .accumulate_grad("w", &Tensor::scalar(1.0))
            .unwrap();
        store.adam_step(&AdamConfig::with_lr(0.1));
        let got = store.value("w").unwrap().scalar_value();
        assert!((got - 0.4).abs() < 1e-7, "got {got}");
        assert!(got > 0.4, "epsilon keeps the step strictly below lr");
    }

    #[test]
    fn identical_runs_are_bitwise_identical() {
        let run = || {
            let mut store = ParamStore::new();
            store.insert("w", Tensor::from_vec(1, 2, vec![0.3, -0.7]));
            let cfg = AdamConfig::with_lr(0.01);
            for step in 0..25 {
                store.zero_grads();
                let g = Tensor::from_vec(1, 2, vec![0.1 * (step as f64), -0.2]);
                store.accumulate_grad("w", &g).unwrap();
                store.adam_step(&cfg);
            }
            store.value("w").unwrap().data().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn unknown_parameter_is_an_error() {
        let mut store = ParamStore::new();
        assert!(matches!(
            store.accumulate_grad("nope", &Tensor::scalar(1.0)),
            Err(Error::UnknownParam(_))
        ));
    }
}
