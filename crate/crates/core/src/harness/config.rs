use std::path::Path;

use crate::data_io::parse_kv;
use crate::error::{Error, Result};
use crate::fusion::Variant;
use crate::policy::{PolicyConfig, TrainConfig};
use crate::simenv::{EnvConfig, Task};

/// Everything a subcommand needs: model, training, simulator and protocol settings.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub policy: PolicyConfig,
    pub train: TrainConfig,
    pub env: EnvConfig,
    pub n_demos: usize,
    pub demo_seed0: u64,
    pub episodes: usize,
    pub eval_seed0: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            policy: PolicyConfig::new(Task::Wipe, Variant::Full),
            train: TrainConfig::default(),
            env: EnvConfig::default(),
            n_demos: 50,
            demo_seed0: 0,
            episodes: 50,
            eval_seed0: 1_000_000,
        }
    }
}

impl RunConfig {
    /// Set one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn p<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.trim().parse().map_err(|_| format!("bad value {v:?} for {key}"))
        }
        match key {
            "n_demos" => self.n_demos = p(key, value)?,
            "demo_seed0" => self.demo_seed0 = p(key, value)?,
            "episodes" => self.episodes = p(key, value)?,
            "eval_seed0" => self.eval_seed0 = p(key, value)?,
            "vision_size" | "tactile_size" | "tau" => return Err(format!("{key} follows env.{key}")),
            _ => {
                let known = self.env.set(key, value)? || self.policy.set(key, value)? || self.train.set(key, value)?;
                if !known {
                    return Err(format!("unknown key {key:?}"));
                }
            }
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (line, (k, v)) in parse_kv(text)? {
            self.set(&k, &v).map_err(|msg| Error::Parse { line, msg })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    /// Copy shared sensor settings from the env into the policy and check combinations.
    pub fn finalize(&mut self) -> Result<()> {
        self.policy.vision_size = self.env.vision_size;
        self.policy.tactile_size = self.env.tactile_size;
        self.policy.tau = self.env.tau;
        self.policy.validate()?;
        self.train.validate()?;
        if self.policy.variant == Variant::VisionOnly && self.policy.tactile_horizon != 2 {
            return Err(Error::Config("vision-only ignores tactile frames; leave tactile_horizon at 2".into()));
        }
        if self.n_demos == 0 || self.episodes == 0 {
            return Err(Error::Config("n_demos and episodes must be positive".into()));
        }
        Ok(())
    }

    pub fn task(&self) -> Task {
        self.policy.task
    }
}
