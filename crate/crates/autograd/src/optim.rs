use std::collections::HashMap;

use crate::error::Result;
use crate::graph::Gradients;
use crate::params::{ParamId, ParamStore};

/// RMSProp: `v ← ρ·v + (1-ρ)·g²`, `θ ← θ - lr·g / (√v + ε)`.
#[derive(Debug, Clone)]
pub struct RmsProp {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    mean_square: HashMap<ParamId, Vec<f64>>,
}

impl RmsProp {
    pub fn new(lr: f64, rho: f64, eps: f64) -> Self {
        RmsProp {
            lr,
            rho,
            eps,
            mean_square: HashMap::new(),
        }
    }

    /// Applies one update to every non-frozen parameter that has a gradient.
    /// Returns the number of parameter tensors touched.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<usize> {
        let mut touched = 0;
        let mut ids: Vec<ParamId> = grads.params().map(|(id, _)| id).collect();
        ids.sort();
        for id in ids {
            if store.is_frozen(id) {
                continue;
            }
            let g = grads.param(id).expect("id comes from grads");
            let value = store.value_mut(id)?;
            let ms = self
                .mean_square
                .entry(id)
                .or_insert_with(|| vec![0.0; g.numel()]);
            for ((w, &gv), v) in value.data_mut().iter_mut().zip(g.data()).zip(ms.iter_mut()) {
                *v = self.rho * *v + (1.0 - self.rho) * gv * gv;
                *w -= self.lr * gv / (v.sqrt() + self.eps);
            }
            touched += 1;
        }
        Ok(touched)
    }
}
