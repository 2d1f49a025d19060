use crate::nn::{Grads, ParamStore};

/// Gradient descent with heavy-ball momentum: `v ← μ v + g`, `p ← p − lr v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub momentum: f64,
    velocity: Option<Grads>,
}

impl Sgd {
    pub fn new(momentum: f64) -> Self {
        Self { momentum, velocity: None }
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &Grads, lr: f64) {
        let velocity = self.velocity.get_or_insert_with(|| params.zeros_like());
        for id in params.ids().collect::<Vec<_>>() {
            let v = velocity.0[id.0].data_mut();
            for (vi, gi) in v.iter_mut().zip(grads.get(id).data()) {
                *vi = self.momentum * *vi + gi;
            }
            for (p, vi) in params.get_mut(id).data_mut().iter_mut().zip(v.iter()) {
                *p -= lr * vi;
            }
        }
    }
}
