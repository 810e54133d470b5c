//! AdamW with decoupled weight decay, and an exponential moving average of weights.

use std::collections::BTreeMap;

use super::params::ParamStore;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AdamWState {
    pub step: u64,
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub weight_decay: f32,
    pub m: BTreeMap<String, Vec<f32>>,
    pub v: BTreeMap<String, Vec<f32>>,
}

impl AdamWState {
    /// Moment buffers shaped like `params`, with betas (0.95, 0.999), eps 1e-8, weight decay 1e-6.
    pub fn new(params: &ParamStore<f32>, lr: f32) -> Self {
        let zeros: BTreeMap<_, _> = params.iter().map(|(k, t)| (k.clone(), vec![0.0; t.len()])).collect();
        Self {
            step: 0,
            lr,
            beta1: 0.95,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-6,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One optimizer application using the gradients stored on `params`.
    pub fn apply(&mut self, params: &mut ParamStore<f32>) -> Result<()> {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - (self.beta1 as f64).powi(t);
        let bc2 = 1.0 - (self.beta2 as f64).powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let decay = 1.0 - lr * self.weight_decay;
        let step_size = (lr as f64 / bc1) as f32;
        let bc2_sqrt = bc2.sqrt() as f32;
        for (name, p) in params.iter_mut() {
            let (m, v) = match (self.m.get_mut(name), self.v.get_mut(name)) {
                (Some(m), Some(v)) if m.len() == p.len() => (m, v),
                _ => return Err(Error::KeyMismatch(format!("optimizer has no moments for {name}"))),
            };
            let g = p.grad.take().ok_or_else(|| Error::Config(format!("no gradient for {name}")))?;
            for (((theta, g), m), v) in p.data_mut().iter_mut().zip(&g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *theta *= decay;
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *theta -= step_size * *m / (v.sqrt() / bc2_sqrt + eps);
            }
            p.grad = Some(g);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmaState {
    pub shadow: ParamStore<f32>,
    pub decay: f32,
}

impl EmaState {
    pub fn new(params: &ParamStore<f32>, decay: f32) -> Self {
        Self { shadow: params.detached(), decay }
    }

    /// `shadow ← decay·shadow + (1−decay)·live`.
    pub fn update(&mut self, live: &ParamStore<f32>, decay: f32) -> Result<()> {
        if !self.shadow.same_keys(live) {
            return Err(Error::KeyMismatch("EMA shadow and live parameters differ".into()));
        }
        self.decay = decay;
        for ((_, s), (_, l)) in self.shadow.iter_mut().zip(live.iter()) {
            if s.len() != l.len() {
                return Err(Error::KeyMismatch("EMA tensor length differs".into()));
            }
            for (a, b) in s.data_mut().iter_mut().zip(l.data()) {
                *a = decay * *a + (1.0 - decay) * *b;
            }
        }
        Ok(())
    }
}

/// Warm-up decay `min(max_decay, (1+step)/(10+step))`.
pub fn ema_decay_for_step(step: u64, max_decay: f32) -> f32 {
    (((1 + step) as f64 / (10 + step) as f64) as f32).min(max_decay)
}
