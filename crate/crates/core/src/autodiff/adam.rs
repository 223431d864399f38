use alloc::vec;
use alloc::vec::Vec;

use super::{AutodiffError, Gradients, ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction over a fixed group of parameters.
///
/// Parameters without a gradient buffer are stepped with a zero gradient.
/// Frozen rows are skipped entirely.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    ids: Vec<ParamId>,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore, ids: Vec<ParamId>) -> Self {
        let first = ids.iter().map(|&id| vec![0.0; store.get(id).len()]).collect::<Vec<_>>();
        let second = first.clone();
        Self { config, ids, step: 0, first, second }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn ids(&self) -> &[ParamId] {
        &self.ids
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<(), AutodiffError> {
        for (k, &id) in self.ids.iter().enumerate() {
            let n = store.get(id).len();
            if self.first[k].len() != n {
                return Err(AutodiffError::ShapeMismatch {
                    op: "adam",
                    lhs: vec![self.first[k].len()],
                    rhs: store.get(id).shape().to_vec(),
                });
            }
            if let Some(g) = grads.get(id) {
                if g.len() != n {
                    return Err(AutodiffError::ShapeMismatch {
                        op: "adam",
                        lhs: vec![g.len()],
                        rhs: store.get(id).shape().to_vec(),
                    });
                }
            }
        }

        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as f64;
        let c1 = 1.0 - libm::pow(beta1, t);
        let c2 = 1.0 - libm::pow(beta2, t);

        for (k, &id) in self.ids.iter().enumerate() {
            let grad = grads.get(id);
            let frozen = store.frozen_rows(id).map(<[bool]>::to_vec);
            let cols = store.get(id).cols();
            let values = store.get_mut(id).data_mut();
            let (m, v) = (&mut self.first[k], &mut self.second[k]);
            for i in 0..values.len() {
                if frozen.as_ref().is_some_and(|f| f[i / cols]) {
                    continue;
                }
                let g = grad.map_or(0.0, |g| g[i]);
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                values[i] -= lr * m_hat / (libm::sqrt(v_hat) + eps);
            }
        }
        Ok(())
    }
}
