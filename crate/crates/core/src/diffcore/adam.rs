//! Named parameter storage and the Adam optimizer.

use std::collections::HashMap;

use super::tape::{Gradients, Tape, Var};
use super::tensor::Tensor;
use crate::error::{shape_err, CtdError, Result};

/// One trainable tensor with its Adam moment buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub m1: Tensor,
    pub m2: Tensor,
}

/// Ordered, uniquely named parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `value` under `name`; returns its index.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<usize> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(CtdError::Invalid(format!("duplicate parameter name {name}")));
        }
        let zeros = Tensor::zeros(value.shape());
        self.index.insert(name.clone(), self.params.len());
        self.params.push(Param {
            name,
            m1: zeros.clone(),
            m2: zeros,
            value,
        });
        Ok(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Param> {
        self.index_of(name).map(|i| &self.params[i])
    }

    pub fn value(&self, i: usize) -> &Tensor {
        &self.params[i].value
    }

    pub fn value_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.params[i].value
    }

    /// Places every parameter on `tape` as a gradient-tracked leaf.
    pub fn bind(&self, tape: &mut Tape) -> Result<Vec<Var>> {
        self.params
            .iter()
            .map(|p| tape.variable(p.value.clone()))
            .collect()
    }

    /// Places every parameter on `tape` as a constant (evaluation passes).
    pub fn bind_frozen(&self, tape: &mut Tape) -> Result<Vec<Var>> {
        self.params
            .iter()
            .map(|p| tape.constant(p.value.clone()))
            .collect()
    }

    /// Gradients for each parameter in store order, `None` where unreachable.
    pub fn collect_grads(&self, grads: &Gradients, vars: &[Var]) -> Vec<Option<Tensor>> {
        vars.iter().map(|&v| grads.get(v).cloned()).collect()
    }
}

/// Bias-corrected Adam.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
        }
    }

    /// One update. Parameters whose gradient is `None` are left untouched,
    /// moments included.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[Option<Tensor>]) -> Result<()> {
        if grads.len() != store.len() {
            return Err(shape_err(
                "adam_step",
                format!("{} gradients for {} parameters", grads.len(), store.len()),
            ));
        }
        for (p, g) in store.params.iter().zip(grads) {
            if let Some(g) = g {
                if g.len() != p.value.len() {
                    return Err(shape_err("adam_step", format!("gradient for {} has wrong shape", p.name)));
                }
            }
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (p, g) in store.params.iter_mut().zip(grads) {
            let Some(g) = g else { continue };
            let m1 = p.m1.data_mut();
            let m2 = p.m2.data_mut();
            for (k, (&gk, x)) in g.data().iter().zip(p.value.data_mut()).enumerate() {
                m1[k] = self.beta1 * m1[k] + (1.0 - self.beta1) * gk;
                m2[k] = self.beta2 * m2[k] + (1.0 - self.beta2) * gk * gk;
                let mh = m1[k] / c1;
                let vh = m2[k] / c2;
                *x -= self.lr * mh / (vh.sqrt() + self.eps);
            }
            p.value.ensure_finite("adam_step")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = ParamStore::new();
        s.add("w", Tensor::vector(vec![1.0, -2.0, 3.0])).unwrap();
        let before = s.clone();
        let mut adam = Adam::new(0.1);
        adam.step(&mut s, &[Some(Tensor::zeros(&[3]))]).unwrap();
        assert_eq!(s.value(0), before.value(0));
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = ParamStore::new();
        s.add("w", Tensor::vector(vec![0.0, 0.0])).unwrap();
        let mut adam = Adam::new(0.01);
        adam.step(&mut s, &[Some(Tensor::vector(vec![3.0, -0.5]))]).unwrap();
        let v = s.value(0).data();
        assert!((v[0] + 0.01).abs() < 1e-9);
        assert!((v[1] - 0.01).abs() < 1e-9);
    }

    #[test]
    fn quadratic_decreases() {
        let mut s = ParamStore::new();
        s.add("theta", Tensor::scalar(1.0)).unwrap();
        let mut adam = Adam::new(0.1);
        let mut prev = 1.0;
        for _ in 0..2 {
            let th = s.value(0).item();
            adam.step(&mut s, &[Some(Tensor::scalar(2.0 * th))]).unwrap();
            let now = s.value(0).item();
            assert!(now < prev);
            prev = now;
        }
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParamStore::new();
        s.add("a", Tensor::scalar(0.0)).unwrap();
        assert!(s.add("a", Tensor::scalar(1.0)).is_err());
    }
}
