use super::{Gradients, NumericsError, ParamSet, Tensor};

/// Dense per-parameter gradient accumulator.
#[derive(Clone, Debug)]
pub struct ParamGrads {
    grads: Vec<Tensor>,
}

impl ParamGrads {
    pub fn zeros_like(params: &ParamSet) -> Self {
        ParamGrads {
            grads: params
                .iter()
                .map(|(_, t)| Tensor::zeros(t.shape()))
                .collect(),
        }
    }

    /// Adds `weight * g` for every parameter that received a gradient.
    pub fn accumulate(&mut self, grads: &Gradients, weight: f64) {
        for (k, acc) in self.grads.iter_mut().enumerate() {
            if let Some(g) = grads.param(super::ParamId(k)) {
                for (a, x) in acc.data_mut().iter_mut().zip(g.data()) {
                    *a += weight * x;
                }
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for g in &mut self.grads {
            g.data_mut().iter_mut().for_each(|x| *x *= c);
        }
    }

    pub fn get(&self, k: usize) -> &Tensor {
        &self.grads[k]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.grads
    }

    pub fn from_tensors(grads: Vec<Tensor>) -> Self {
        ParamGrads { grads }
    }
}

/// Bias-corrected Adam.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|(_, t)| Tensor::zeros(t.shape()))
                .collect()
        };
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamGrads) -> Result<(), NumericsError> {
        if grads.grads.len() != params.len() || self.m.len() != params.len() {
            return Err(NumericsError::ParamLayout(format!(
                "expected {} gradient tensors, got {}",
                params.len(),
                grads.grads.len()
            )));
        }
        for (id, g) in params.ids().zip(&grads.grads) {
            if params.get(id).shape() != g.shape() {
                return Err(NumericsError::ShapeMismatch {
                    expected: params.get(id).shape().to_vec(),
                    found: g.shape().to_vec(),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (k, id) in params.ids().enumerate() {
            let g = grads.grads[k].data();
            let m = self.m[k].data_mut();
            for (mi, gi) in m.iter_mut().zip(g) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
            }
            let v = self.v[k].data_mut();
            for (vi, gi) in v.iter_mut().zip(g) {
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
            }
            let (m, v) = (self.m[k].data(), self.v[k].data());
            let p = params.get_mut(id).data_mut();
            for i in 0..p.len() {
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
