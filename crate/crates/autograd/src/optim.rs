use std::io::{Read, Write};

use crate::error::TensorError;
use crate::params::ParamStore;
use crate::tape::Gradients;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam bound to the layout of one [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = store
            .ids()
            .map(|id| Tensor::zeros(store.get(id).shape()))
            .collect();
        Self {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update to every trainable entry of `store` that received a
    /// gradient. Entries without a gradient keep their value and moments.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) {
        assert_eq!(self.m.len(), store.len(), "optimizer bound to another store");
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let bias1 = 1.0 - beta1.powi(self.step as i32);
        let bias2 = 1.0 - beta2.powi(self.step as i32);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            if !store.is_trainable(id) {
                continue;
            }
            let Some(g) = grads.param(store, id) else {
                continue;
            };
            let i = id.index();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let p = store.get_mut(id).data_mut();
            for (((p, m), v), &g) in p.iter_mut().zip(m).zip(v).zip(g.data()) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }

    /// Serializes the moment estimates as a parameter blob.
    pub fn write_to(&self, w: &mut impl Write) -> Result<(), TensorError> {
        let mut store = ParamStore::new("adam");
        store.add_buffer("step", Tensor::scalar(self.step as f64));
        for (i, (m, v)) in self.m.iter().zip(&self.v).enumerate() {
            store.add_buffer(format!("m{i}"), m.clone());
            store.add_buffer(format!("v{i}"), v.clone());
        }
        store.write_to(w)
    }

    pub fn read_from(&mut self, r: &mut impl Read) -> Result<(), TensorError> {
        let store = ParamStore::read_from("adam", r)?;
        if store.len() != 1 + 2 * self.m.len() {
            return Err(TensorError::Blob("optimizer state does not match model".into()));
        }
        let ids: Vec<_> = store.ids().collect();
        self.step = store.get(ids[0]).item() as u64;
        for i in 0..self.m.len() {
            let m = store.get(ids[1 + 2 * i]);
            let v = store.get(ids[2 + 2 * i]);
            if m.shape() != self.m[i].shape() || v.shape() != self.v[i].shape() {
                return Err(TensorError::Blob(format!("optimizer moment {i} shape")));
            }
            self.m[i] = m.clone();
            self.v[i] = v.clone();
        }
        Ok(())
    }
}
