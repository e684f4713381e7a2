//! AdamW (decoupled weight decay) and a cosine-annealing schedule with warm
//! restarts.

use std::collections::BTreeMap;

use crate::Arr;

pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    t: u64,
    state: BTreeMap<String, (Arr, Arr)>,
}

impl AdamW {
    pub fn new(weight_decay: f64) -> Self {
        AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            t: 0,
            state: BTreeMap::new(),
        }
    }

    /// One update over every parameter that received a gradient.
    pub fn step(
        &mut self,
        params: &mut BTreeMap<String, Arr>,
        grads: &BTreeMap<String, Arr>,
        lr: f64,
    ) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (name, grad) in grads {
            let Some(p) = params.get_mut(name) else {
                panic!("gradient for unknown parameter `{name}`");
            };
            let (m, v) = self
                .state
                .entry(name.clone())
                .or_insert_with(|| (Arr::zeros(p.raw_dim()), Arr::zeros(p.raw_dim())));
            for (((pv, gv), mv), vv) in p.iter_mut().zip(grad.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mv = self.beta1 * *mv + (1.0 - self.beta1) * gv;
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * gv * gv;
                let mhat = *mv / bc1;
                let vhat = *vv / bc2;
                // Decoupled decay, then the adaptive step.
                *pv -= lr * self.weight_decay * *pv;
                *pv -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

/// Cosine annealing with warm restarts. Each cycle sweeps the full cosine
/// from `max_lr` (first step of the cycle) down to exactly `min_lr` (last
/// step of the cycle); the next cycle is `mult` times longer.
#[derive(Clone, Copy, Debug)]
pub struct CosineWarmRestarts {
    pub max_lr: f64,
    pub min_lr: f64,
    pub period: usize,
    pub mult: usize,
}

impl CosineWarmRestarts {
    pub fn new(max_lr: f64, min_lr: f64, period: usize, mult: usize) -> Self {
        assert!(period >= 1 && mult >= 1);
        CosineWarmRestarts { max_lr, min_lr, period, mult }
    }

    pub fn lr(&self, step: u64) -> f64 {
        let mut s = step as usize;
        let mut len = self.period;
        while s >= len {
            s -= len;
            len = len.saturating_mul(self.mult).max(1);
        }
        if len <= 1 {
            return self.max_lr;
        }
        let phase = s as f64 / (len - 1) as f64;
        self.min_lr + 0.5 * (self.max_lr - self.min_lr) * (1.0 + (std::f64::consts::PI * phase).cos())
    }
}
