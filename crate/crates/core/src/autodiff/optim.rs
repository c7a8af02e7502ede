use super::params::{Grads, ParamStore};
use crate::error::{Error, Result};

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Adam {
        let zeros: Vec<Vec<f64>> = (0..store.len())
            .map(|i| vec![0.0; store.tensor(i).len()])
            .collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. A non-finite gradient aborts before any parameter
    /// is touched and names the offending tensor.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Grads) -> Result<()> {
        for id in 0..store.len() {
            if grads.get(id).iter().any(|g| !g.is_finite()) {
                return Err(Error::Training(format!(
                    "non-finite gradient in parameter {}",
                    store.name(id)
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for id in 0..store.len() {
            let g = grads.get(id);
            let (m, v) = (&mut self.m[id], &mut self.v[id]);
            let p = store.tensor_mut(id).data_mut();
            for j in 0..p.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let mh = m[j] / c1;
                let vh = v[j] / c2;
                p[j] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
