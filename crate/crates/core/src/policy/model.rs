use crate::error::{Error, Result};
use crate::fusion::{ConditionLayout, Fusion, Variant};
use crate::numerics::{Graph, Initializer, ParamStore, Real, Tensor, Var};
use crate::simenv::{Task, ACTION_DIM, PROPRIO_DIM};
use crate::tactile::{dyn_feature_len, TactileEncoder};
use crate::vision::VisionEncoder;

use super::denoiser::Denoiser;
use super::schedule::DiffusionSchedule;

/// Architecture and horizon settings shared by training and rollout.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyConfig {
    pub task: Task,
    pub variant: Variant,
    pub dim: usize,
    pub tactile_horizon: usize,
    pub obs_horizon: usize,
    pub chunk: usize,
    pub action_dim: usize,
    pub diffusion_steps: usize,
    pub exec_steps: usize,
    pub vision_size: usize,
    pub tactile_size: usize,
    pub tau: f64,
}

impl PolicyConfig {
    pub fn new(task: Task, variant: Variant) -> Self {
        Self {
            task,
            variant,
            dim: 64,
            tactile_horizon: 2,
            obs_horizon: 2,
            chunk: 16,
            action_dim: ACTION_DIM,
            diffusion_steps: 50,
            exec_steps: 8,
            vision_size: 48,
            tactile_size: 32,
            tau: 0.05,
        }
    }

    pub fn chunk_len(&self) -> usize {
        self.chunk * self.action_dim
    }

    pub fn proprio_len(&self) -> usize {
        PROPRIO_DIM * self.obs_horizon
    }

    pub fn dyn_len(&self) -> usize {
        dyn_feature_len(2, self.tactile_horizon)
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("task", self.task.as_str().to_string()),
            ("variant", self.variant.as_str().to_string()),
            ("dim", self.dim.to_string()),
            ("tactile_horizon", self.tactile_horizon.to_string()),
            ("obs_horizon", self.obs_horizon.to_string()),
            ("chunk", self.chunk.to_string()),
            ("diffusion_steps", self.diffusion_steps.to_string()),
            ("exec_steps", self.exec_steps.to_string()),
            ("vision_size", self.vision_size.to_string()),
            ("tactile_size", self.tactile_size.to_string()),
            ("tau", self.tau.to_string()),
        ]
    }

    /// Set one key; `Ok(false)` if the key belongs elsewhere.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<bool, String> {
        fn p<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.trim().parse().map_err(|_| format!("bad value {v:?} for {key}"))
        }
        match key {
            "task" => self.task = p(key, value)?,
            "variant" => self.variant = p(key, value)?,
            "dim" => self.dim = p(key, value)?,
            "tactile_horizon" => self.tactile_horizon = p(key, value)?,
            "obs_horizon" => self.obs_horizon = p(key, value)?,
            "chunk" => self.chunk = p(key, value)?,
            "diffusion_steps" => self.diffusion_steps = p(key, value)?,
            "exec_steps" => self.exec_steps = p(key, value)?,
            "vision_size" => self.vision_size = p(key, value)?,
            "tactile_size" => self.tactile_size = p(key, value)?,
            "tau" => self.tau = p(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.tactile_horizon) {
            return Err(Error::Config(format!("tactile horizon {} outside 2..=4", self.tactile_horizon)));
        }
        if self.obs_horizon == 0 || self.chunk == 0 || self.dim == 0 || self.diffusion_steps == 0 {
            return Err(Error::Config("horizons, chunk, dim and diffusion steps must be positive".into()));
        }
        if self.exec_steps == 0 || self.exec_steps > self.chunk {
            return Err(Error::Config(format!("exec_steps {} not in 1..={}", self.exec_steps, self.chunk)));
        }
        if self.action_dim != ACTION_DIM {
            return Err(Error::Config(format!("simulated tasks use {ACTION_DIM} action channels")));
        }
        Ok(())
    }
}

/// Observation inputs for a batch of `b` samples.
#[derive(Clone, Debug)]
pub struct ObsBatch<T: Real = f32> {
    pub b: usize,
    /// `[b·T_o, 1, V, V]`
    pub vision: Tensor<T>,
    /// `[b·H_t, 1, S, S]`, absent for vision-only models.
    pub tactile_l: Option<Tensor<T>>,
    pub tactile_r: Option<Tensor<T>>,
    /// `[b, dyn_len]`
    pub fdyn: Tensor<T>,
    /// `[b, 5·T_o]`, normalized.
    pub proprio: Tensor<T>,
}

impl<T: Real> ObsBatch<T> {
    pub fn cast<U: Real>(&self) -> ObsBatch<U> {
        ObsBatch {
            b: self.b,
            vision: self.vision.cast(),
            tactile_l: self.tactile_l.as_ref().map(|t| t.cast()),
            tactile_r: self.tactile_r.as_ref().map(|t| t.cast()),
            fdyn: self.fdyn.cast(),
            proprio: self.proprio.cast(),
        }
    }
}

/// Perception, fusion and denoiser wired together.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyModel {
    pub cfg: PolicyConfig,
    pub vision: VisionEncoder,
    pub tactile: Option<TactileEncoder>,
    pub fusion: Fusion,
    pub layout: ConditionLayout,
    pub denoiser: Denoiser,
    pub schedule: DiffusionSchedule,
}

impl PolicyModel {
    pub fn new(cfg: PolicyConfig) -> Result<Self> {
        cfg.validate()?;
        let vision = VisionEncoder::new(cfg.vision_size, cfg.obs_horizon, cfg.dim)?;
        let tactile = if cfg.variant.uses_tactile() {
            Some(TactileEncoder::new(cfg.tactile_size, cfg.tactile_horizon, cfg.dim)?)
        } else {
            None
        };
        let layout = ConditionLayout { dim: cfg.dim, dyn_len: cfg.dyn_len(), proprio_len: cfg.proprio_len() };
        let denoiser = Denoiser::new(cfg.chunk_len(), layout.len());
        let schedule = DiffusionSchedule::scaled(cfg.diffusion_steps)?;
        Ok(Self { fusion: Fusion::new(cfg.variant, cfg.dim), cfg, vision, tactile, layout, denoiser, schedule })
    }

    pub fn init_params(&self, seed: u64) -> ParamStore<f32> {
        let mut store = ParamStore::new();
        let mut init = Initializer::new(&mut store, seed);
        self.vision.init(&mut init);
        if let Some(t) = &self.tactile {
            t.init(&mut init);
        }
        self.fusion.init(&mut init);
        self.denoiser.init(&mut init);
        store
    }

    /// Condition vector `[b, layout.len()]` and fusion weights `[b, 3]` if any.
    pub fn condition<T: Real>(&self, g: &mut Graph<T>, store: &ParamStore<T>, obs: &ObsBatch<T>) -> Result<(Var, Option<Var>)> {
        let v = g.input(obs.vision.clone());
        let fv = self.vision.forward(g, store, v)?;
        let (fl, fr) = match (&self.tactile, &obs.tactile_l, &obs.tactile_r) {
            (Some(enc), Some(l), Some(r)) => {
                let (l, r) = (g.input(l.clone()), g.input(r.clone()));
                enc.forward(g, store, l, r)?
            }
            (None, _, _) => {
                let z = g.zeros(&[obs.b, self.cfg.dim]);
                (z, z)
            }
            _ => return Err(Error::Config("tactile frames missing for a tactile variant".into())),
        };
        let out = self.fusion.forward(g, store, fv, fl, fr)?;
        let fdyn = g.input(obs.fdyn.clone());
        let proprio = g.input(obs.proprio.clone());
        let cond = self.layout.assemble(g, self.cfg.variant, out.fused, fdyn, proprio)?;
        Ok((cond, out.weights))
    }

    pub fn predict_eps<T: Real>(&self, g: &mut Graph<T>, store: &ParamStore<T>, xt: Var, temb: Var, cond: Var) -> Result<Var> {
        self.denoiser.forward(g, store, xt, temb, cond)
    }

    /// Epsilon-prediction MSE for noised chunks `xt` at embedded steps `temb`.
    pub fn loss<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        obs: &ObsBatch<T>,
        xt: Tensor<T>,
        temb: Tensor<T>,
        eps: Tensor<T>,
    ) -> Result<Var> {
        let (cond, _) = self.condition(g, store, obs)?;
        let xt = g.input(xt);
        let temb = g.input(temb);
        let pred = self.predict_eps(g, store, xt, temb, cond)?;
        let target = g.input(eps);
        g.mse(pred, target)
    }
}
