use std::sync::Arc;

use super::{Grads, Graph, Real, Tensor, Var};
use crate::error::{Error, Result};

/// A named trainable tensor with its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Parameter<T: Real = f32> {
    pub name: String,
    pub value: Arc<Tensor<T>>,
    pub grad: Tensor<T>,
}

impl<T: Real> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape().to_vec());
        Parameter {
            name: name.into(),
            value: Arc::new(value),
            grad,
        }
    }
}

/// Ordered set of uniquely named parameters.
#[derive(Debug, Clone, Default)]
pub struct ParamSet<T: Real = f32> {
    params: Vec<Parameter<T>>,
}

impl<T: Real> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet { params: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<()> {
        let name = name.into();
        if self.params.iter().any(|p| p.name == name) {
            return Err(Error::Invalid(format!("duplicate parameter name {name:?}")));
        }
        self.params.push(Parameter::new(name, value));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn get(&self, name: &str) -> Option<&Parameter<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn value(&self, i: usize) -> &Tensor<T> {
        &self.params[i].value
    }

    /// Mutable access to a value; copies it first if a graph still shares it.
    pub fn value_mut(&mut self, i: usize) -> &mut Tensor<T> {
        Arc::make_mut(&mut self.params[i].value)
    }

    pub(crate) fn value_and_grad_mut(&mut self, i: usize) -> (&mut Tensor<T>, &Tensor<T>) {
        let p = &mut self.params[i];
        (Arc::make_mut(&mut p.value), &p.grad)
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Add every parameter to `graph` as a shared leaf, in set order.
    pub fn bind(&self, graph: &mut Graph<T>) -> Vec<Var> {
        self.params.iter().map(|p| graph.leaf_shared(p.value.clone())).collect()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().fill(T::zero());
        }
    }

    /// Add the gradients of bound leaves (from [`ParamSet::bind`]).
    pub fn accumulate(&mut self, grads: &Grads<T>, vars: &[Var]) {
        for (p, &v) in self.params.iter_mut().zip(vars) {
            if let Some(g) = grads.get(v) {
                for (d, &s) in p.grad.data_mut().iter_mut().zip(g) {
                    *d = *d + s;
                }
            }
        }
    }

    /// Add per-parameter flat gradient buffers, in set order.
    pub fn accumulate_flat(&mut self, grads: &[Vec<T>]) {
        for (p, g) in self.params.iter_mut().zip(grads) {
            for (d, &s) in p.grad.data_mut().iter_mut().zip(g) {
                *d = *d + s;
            }
        }
    }

    pub fn cast<U: Real>(&self) -> ParamSet<U> {
        ParamSet {
            params: self
                .params
                .iter()
                .map(|p| Parameter {
                    name: p.name.clone(),
                    value: Arc::new(p.value.cast()),
                    grad: p.grad.cast(),
                })
                .collect(),
        }
    }
}

/// Per-parameter gradient buffers extracted from one backward sweep.
pub(crate) fn flat_grads<T: Real>(grads: &Grads<T>, graph: &Graph<T>, vars: &[Var]) -> Vec<Vec<T>> {
    vars.iter()
        .map(|&v| match grads.get(v) {
            Some(g) => g.to_vec(),
            None => vec![T::zero(); graph.value(v).len()],
        })
        .collect()
}
