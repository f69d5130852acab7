use super::{ParamSet, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<Tensor<f32>>,
    pub v: Vec<Tensor<f32>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ParamSet<f32>, config: AdamConfig) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.value.shape().to_vec())).collect();
        AdamState {
            config,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    /// One update from the gradients stored in `params`.
    ///
    /// Fails without touching any parameter if a gradient is not finite.
    pub fn step(&mut self, params: &mut ParamSet<f32>) -> Result<()> {
        if self.config.lr <= 0.0 {
            return Err(Error::Invalid(format!("learning rate must be > 0, got {}", self.config.lr)));
        }
        if self.m.len() != params.len() {
            return Err(Error::Invalid(format!(
                "optimizer tracks {} parameters, set has {}",
                self.m.len(),
                params.len()
            )));
        }
        for p in params.iter() {
            if let Some(bad) = p.grad.data().iter().position(|g| !g.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite gradient in parameter {:?} at index {}",
                    p.name, bad
                )));
            }
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bias1 = 1.0 - beta1.powi(self.t as i32);
        let bias2 = 1.0 - beta2.powi(self.t as i32);
        let (b1, b2) = (beta1 as f32, beta2 as f32);
        let (c1, c2) = ((1.0 - beta1) as f32, (1.0 - beta2) as f32);
        let step = (lr / bias1) as f32;
        let inv_bias2_sqrt = (1.0 / bias2.sqrt()) as f32;
        let eps = eps as f32;
        for i in 0..params.len() {
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let (value, grad) = params.value_and_grad_mut(i);
            for (((x, &g), mi), vi) in value.data_mut().iter_mut().zip(grad.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + c1 * g;
                *vi = b2 * *vi + c2 * g * g;
                *x -= step * *mi / (vi.sqrt() * inv_bias2_sqrt + eps);
            }
        }
        Ok(())
    }
}
