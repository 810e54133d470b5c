use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Linear-β DDPM schedule with 1-based step indices.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionSchedule {
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_bar: Vec<f64>,
}

/// Reference β range for a 1000-step schedule.
pub const BETA_MIN: f64 = 1e-4;
pub const BETA_MAX: f64 = 0.02;

impl DiffusionSchedule {
    pub fn new(steps: usize, beta_min: f64, beta_max: f64) -> Result<Self> {
        if steps == 0 || !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
            return Err(Error::OutOfRange(format!("schedule T={steps}, beta {beta_min}..{beta_max}")));
        }
        let beta: Vec<f64> = (0..steps)
            .map(|i| if steps == 1 { beta_min } else { beta_min + (beta_max - beta_min) * i as f64 / (steps - 1) as f64 })
            .collect();
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let mut alpha_bar = Vec::with_capacity(steps);
        let mut acc = 1.0;
        for a in &alpha {
            acc *= a;
            alpha_bar.push(acc);
        }
        Ok(Self { beta, alpha, alpha_bar })
    }

    /// The reference 1000-step range rescaled by `1000/T`, so a short schedule
    /// still ends near pure noise.
    pub fn scaled(steps: usize) -> Result<Self> {
        let k = 1000.0 / steps as f64;
        Self::new(steps, BETA_MIN * k, (BETA_MAX * k).min(0.999))
    }

    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    fn idx(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.steps() {
            return Err(Error::OutOfRange(format!("diffusion step {t} not in 1..={}", self.steps())));
        }
        Ok(t - 1)
    }

    pub fn alpha_bar_at(&self, t: usize) -> Result<f64> {
        Ok(self.alpha_bar[self.idx(t)?])
    }

    /// Posterior variance `β_t·(1−ᾱ_{t−1})/(1−ᾱ_t)`, with `ᾱ_0 = 1`.
    pub fn sigma2(&self, t: usize) -> Result<f64> {
        let i = self.idx(t)?;
        let prev = if i == 0 { 1.0 } else { self.alpha_bar[i - 1] };
        Ok(self.beta[i] * (1.0 - prev) / (1.0 - self.alpha_bar[i]))
    }

    /// `√ᾱ_t·x0 + √(1−ᾱ_t)·eps`.
    pub fn q_sample(&self, x0: &[f32], t: usize, eps: &[f32]) -> Result<Vec<f32>> {
        if x0.len() != eps.len() {
            return Err(crate::error::shape_err("q_sample", &[x0.len()], &[eps.len()]));
        }
        let ab = self.alpha_bar_at(t)?;
        let (a, b) = (ab.sqrt() as f32, (1.0 - ab).sqrt() as f32);
        Ok(x0.iter().zip(eps).map(|(x, e)| a * x + b * e).collect())
    }

    /// One ancestral step `x_t → x_{t−1}` given the predicted noise and fresh `z`.
    pub fn step_back(&self, x: &mut [f32], eps_hat: &[f32], t: usize, z: &[f32]) -> Result<()> {
        let i = self.idx(t)?;
        let inv = 1.0 / self.alpha[i].sqrt();
        let coef = self.beta[i] / (1.0 - self.alpha_bar[i]).sqrt();
        let sigma = if t > 1 { self.sigma2(t)?.sqrt() } else { 0.0 };
        for ((xv, e), zv) in x.iter_mut().zip(eps_hat).zip(z) {
            *xv = (inv * (*xv as f64 - coef * *e as f64) + sigma * *zv as f64) as f32;
        }
        Ok(())
    }
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) as f32).collect()
}

/// Ancestral sampling: `x_T ~ N(0, I)`, then `T` denoising steps with
/// `eps_fn(x_t, t)` as the noise predictor.
pub fn ddpm_sample<F>(schedule: &DiffusionSchedule, n: usize, rng: &mut ChaCha8Rng, mut eps_fn: F) -> Result<Vec<f32>>
where
    F: FnMut(&[f32], usize) -> Result<Vec<f32>>,
{
    let mut x = normal_vec(rng, n);
    for t in (1..=schedule.steps()).rev() {
        let eps = eps_fn(&x, t)?;
        let z = if t > 1 { normal_vec(rng, n) } else { vec![0.0; n] };
        schedule.step_back(&mut x, &eps, t, &z)?;
    }
    Ok(x)
}

/// Sinusoidal embedding of a diffusion step.
pub fn timestep_embedding(t: usize, dim: usize) -> Vec<f32> {
    let half = dim / 2;
    let mut out = vec![0.0f32; dim];
    for i in 0..half {
        let freq = (-(10000f64.ln()) * i as f64 / half as f64).exp();
        let a = t as f64 * freq;
        out[i] = a.sin() as f32;
        out[half + i] = a.cos() as f32;
    }
    out
}
