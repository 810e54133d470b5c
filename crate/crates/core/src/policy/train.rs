use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{ema_decay_for_step, rng_for, AdamWState, EmaState, Graph, ParamStore, Tensor};
use crate::simenv::EpisodeTrace;

use super::data::{action_chunk, build_obs_batch, observation_window, NormStats, Window};
use super::model::PolicyModel;
use super::schedule::{normal_vec, timestep_embedding};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    /// Diffusion draws per observation window in a batch.
    pub noise_draws: usize,
    pub lr: f32,
    pub warmup: u64,
    pub ema_max: f32,
    pub augment: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 50, batch: 64, noise_draws: 4, lr: 3e-4, warmup: 100, ema_max: 0.995, augment: true, seed: 0 }
    }
}

impl TrainConfig {
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("epochs", self.epochs.to_string()),
            ("batch", self.batch.to_string()),
            ("noise_draws", self.noise_draws.to_string()),
            ("lr", self.lr.to_string()),
            ("warmup", self.warmup.to_string()),
            ("ema_max", self.ema_max.to_string()),
            ("augment", self.augment.to_string()),
            ("seed", self.seed.to_string()),
        ]
    }

    /// Set one key; `Ok(false)` if the key belongs elsewhere.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<bool, String> {
        fn p<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.trim().parse().map_err(|_| format!("bad value {v:?} for {key}"))
        }
        match key {
            "epochs" => self.epochs = p(key, value)?,
            "batch" => self.batch = p(key, value)?,
            "noise_draws" => self.noise_draws = p(key, value)?,
            "lr" => self.lr = p(key, value)?,
            "warmup" => self.warmup = p(key, value)?,
            "ema_max" => self.ema_max = p(key, value)?,
            "augment" => self.augment = p(key, value)?,
            "seed" => self.seed = p(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch == 0 || self.noise_draws == 0 {
            return Err(Error::Config("epochs, batch and noise_draws must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(0.0..1.0).contains(&self.ema_max) {
            return Err(Error::Config(format!("lr {} or ema_max {} out of range", self.lr, self.ema_max)));
        }
        Ok(())
    }
}

/// Demonstrations indexed as `(episode, step)` training samples.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub traces: Vec<EpisodeTrace>,
    pub norm: NormStats,
    pub samples: Vec<(usize, usize)>,
}

impl Dataset {
    pub fn new(traces: Vec<EpisodeTrace>) -> Result<Self> {
        if traces.is_empty() {
            return Err(Error::Dataset("no demonstrations".into()));
        }
        let norm = NormStats::fit(&traces);
        let samples = traces.iter().enumerate().flat_map(|(e, t)| (0..t.actions.len()).map(move |s| (e, s))).collect();
        Ok(Self { traces, norm, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Live weights, optimizer moments and EMA shadow. Every step draws its
/// randomness from `(seed, step)`, so a restored trainer continues bit-for-bit.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: PolicyModel,
    pub tcfg: TrainConfig,
    pub params: ParamStore<f32>,
    pub opt: AdamWState,
    pub ema: EmaState,
}

impl Trainer {
    pub fn new(model: PolicyModel, tcfg: TrainConfig) -> Self {
        let params = model.init_params(tcfg.seed);
        let opt = AdamWState::new(&params, tcfg.lr);
        let ema = EmaState::new(&params, 0.0);
        Self { model, tcfg, params, opt, ema }
    }

    pub fn step(&self) -> u64 {
        self.opt.step
    }

    pub fn steps_per_epoch(&self, data: &Dataset) -> usize {
        data.len().div_ceil(self.tcfg.batch)
    }

    pub fn total_steps(&self, data: &Dataset) -> u64 {
        (self.steps_per_epoch(data) * self.tcfg.epochs) as u64
    }

    /// Linear warm-up then cosine decay to zero at `total`.
    pub fn lr_at(&self, step: u64, total: u64) -> f32 {
        let base = self.tcfg.lr as f64;
        if step < self.tcfg.warmup {
            return (base * (step + 1) as f64 / self.tcfg.warmup as f64) as f32;
        }
        let span = total.saturating_sub(self.tcfg.warmup).max(1) as f64;
        let p = ((step - self.tcfg.warmup) as f64 / span).min(1.0);
        (base * 0.5 * (1.0 + (std::f64::consts::PI * p).cos())) as f32
    }

    fn batch_indices(&self, data: &Dataset, step: u64) -> Vec<usize> {
        let per = self.steps_per_epoch(data) as u64;
        let epoch = step / per;
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng_for(self.tcfg.seed, &format!("epoch/{epoch}")));
        let start = (step % per) as usize * self.tcfg.batch;
        order[start..(start + self.tcfg.batch).min(data.len())].to_vec()
    }

    /// One optimizer step; returns the batch loss.
    pub fn train_step(&mut self, data: &Dataset) -> Result<f32> {
        let step = self.step();
        let total = self.total_steps(data);
        let cfg = &self.model.cfg;
        let mut rng = rng_for(self.tcfg.seed, &format!("step/{step}"));
        let idx = self.batch_indices(data, step);
        let windows: Vec<Window> = idx
            .iter()
            .map(|&i| {
                let (e, t) = data.samples[i];
                observation_window(&data.traces[e].observations, t, cfg, &data.norm)
            })
            .collect::<Result<_>>()?;
        let obs = build_obs_batch(&windows, cfg, self.tcfg.augment.then_some(&mut rng))?;

        let (b, k, n) = (idx.len(), self.tcfg.noise_draws.max(1), cfg.chunk_len());
        let sched = &self.model.schedule;
        let mut xt = Vec::with_capacity(b * k * n);
        let mut temb = Vec::with_capacity(b * k * 32);
        let mut eps = Vec::with_capacity(b * k * n);
        let mut select = vec![0.0f32; b * k * b];
        for (row, &i) in idx.iter().enumerate() {
            let (e, t) = data.samples[i];
            let x0 = action_chunk(&data.traces[e].actions, t, cfg, &data.norm);
            for j in 0..k {
                let ts = rng.gen_range(1..=sched.steps());
                let noise = normal_vec(&mut rng, n);
                xt.extend(sched.q_sample(&x0, ts, &noise)?);
                temb.extend(timestep_embedding(ts, self.model.denoiser.time_dim));
                eps.extend(noise);
                select[(row * k + j) * b + row] = 1.0;
            }
        }

        let mut g = Graph::new();
        let (cond, _) = self.model.condition(&mut g, &self.params, &obs)?;
        let sel = g.constant(&[b * k, b], select)?;
        let cond = g.matmul(sel, cond)?;
        let xt = g.input(Tensor::new(&[b * k, n], xt)?);
        let temb = g.input(Tensor::new(&[b * k, self.model.denoiser.time_dim], temb)?);
        let pred = self.model.predict_eps(&mut g, &self.params, xt, temb, cond)?;
        let target = g.input(Tensor::new(&[b * k, n], eps)?);
        let loss = g.mse(pred, target)?;
        let value = g.data(loss)[0];
        if !value.is_finite() {
            return Err(Error::Degenerate(format!("non-finite loss at step {step}")));
        }
        g.backward(loss, &mut self.params)?;
        self.opt.lr = self.lr_at(step, total);
        self.opt.apply(&mut self.params)?;
        self.ema.update(&self.params, ema_decay_for_step(step, self.tcfg.ema_max))?;
        Ok(value)
    }

    /// Run until `total_steps`, calling `on_epoch(epoch, mean_loss)` after each epoch.
    pub fn fit(&mut self, data: &Dataset, mut on_epoch: impl FnMut(usize, f32) -> Result<()>) -> Result<()> {
        let per = self.steps_per_epoch(data) as u64;
        let total = self.total_steps(data);
        let mut acc = 0.0f64;
        let mut count = 0;
        while self.step() < total {
            acc += self.train_step(data)? as f64;
            count += 1;
            if self.step() % per == 0 {
                on_epoch((self.step() / per) as usize, (acc / count as f64) as f32)?;
                acc = 0.0;
                count = 0;
            }
        }
        Ok(())
    }
}
