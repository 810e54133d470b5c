//! Synthetic contact-rich environments: surface wiping and fragile pick.
//!
//! Vision frames are rendered from geometry only; pressure and grip force
//! reach the observation exclusively through the two tactile frames.

mod config;
mod outcome;
mod pick;
mod render;
mod wipe;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use config::EnvConfig;
pub use outcome::{classify_outcome, classify_outcome_pick, classify_outcome_wipe, force_proxy, DemoForceStats};
pub use pick::{PickPhase, PickState};
pub use render::{render_tactile, render_vision_pick, render_vision_wipe, Side};
pub use wipe::{WipeLine, WipeState};

use crate::error::{Error, Result};
use crate::numerics::rng_for;

/// Number of proprioceptive channels: `(x, y, z_cmd, θ, g)`.
pub const PROPRIO_DIM: usize = 5;
/// Number of action channels: `(dx, dy, dz, dθ, dg)`.
pub const ACTION_DIM: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Task {
    Wipe,
    Pick,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Wipe => "wipe",
            Task::Pick => "pick",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wipe" => Ok(Task::Wipe),
            "pick" => Ok(Task::Pick),
            other => Err(Error::UnknownTask(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Outcome {
    Success,
    Float,
    Overpressed,
    TooGentle,
    Broken,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [Outcome::Success, Outcome::Float, Outcome::Overpressed, Outcome::TooGentle, Outcome::Broken];

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "Success",
            Outcome::Float => "Float",
            Outcome::Overpressed => "Overpressed",
            Outcome::TooGentle => "TooGentle",
            Outcome::Broken => "Broken",
        }
    }

    pub fn code(self) -> u32 {
        Outcome::ALL.iter().position(|o| *o == self).unwrap() as u32
    }

    pub fn from_code(c: u32) -> Option<Outcome> {
        Outcome::ALL.get(c as usize).copied()
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Outcome {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Outcome::ALL
            .iter()
            .copied()
            .find(|o| o.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown outcome label {s:?}")))
    }
}

/// One timestep of sensing.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    /// `V×V`, row-major, values in `[0,1]`.
    pub vision: Vec<f32>,
    /// `S×S`, row-major, values in `[0,1]`.
    pub tactile_l: Vec<f32>,
    pub tactile_r: Vec<f32>,
    /// `(x, y, z_cmd, θ, g)`; `z_cmd` is the commanded height, not the penetration.
    pub proprio: [f32; PROPRIO_DIM],
}

/// Task-space deltas `(dx, dy, dz, dθ, dg)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ActionCommand(pub [f32; ACTION_DIM]);

impl ActionCommand {
    pub fn new(dx: f32, dy: f32, dz: f32, dtheta: f32, dg: f32) -> Self {
        Self([dx, dy, dz, dtheta, dg])
    }

    /// Component-wise clamp to `±limit`; NaN becomes 0.
    pub fn clamped(self, limit: f32) -> Self {
        Self(self.0.map(|v| if v.is_nan() { 0.0 } else { v.clamp(-limit, limit) }))
    }
}

/// Hidden simulator truth recorded alongside each observation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Truth {
    /// Contact pressure `p` (wipe) or grip force `f` (pick).
    pub pressure: f32,
    /// Erased ink fraction (wipe); lift height of the chip (pick).
    pub progress: f32,
    /// Largest contact-disk displacement in pixels over both sensors.
    pub shear_px: f32,
    /// Silicone damaged (wipe) or chip broken (pick), sticky.
    pub damaged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub task: Task,
    pub seed: u64,
    /// `n+1` observations for `n` actions.
    pub observations: Vec<Observation>,
    pub actions: Vec<ActionCommand>,
    /// One entry per observation.
    pub truth: Vec<Truth>,
    pub terminated: bool,
    pub outcome: Option<Outcome>,
}

impl EpisodeTrace {
    pub fn new(task: Task, seed: u64, first: Observation, truth: Truth) -> Self {
        Self {
            task,
            seed,
            observations: vec![first],
            actions: Vec::new(),
            truth: vec![truth],
            terminated: false,
            outcome: None,
        }
    }

    pub fn push(&mut self, action: ActionCommand, obs: Observation, truth: Truth) {
        self.actions.push(action);
        self.observations.push(obs);
        self.truth.push(truth);
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn max_pressure(&self) -> f32 {
        self.truth.iter().map(|t| t.pressure).fold(0.0, f32::max)
    }

    /// Un-erased ink fraction at the end of a wipe episode.
    pub fn residual_fraction(&self) -> f32 {
        1.0 - self.truth.last().map_or(0.0, |t| t.progress)
    }

    /// First step whose recorded pressure is positive.
    pub fn first_contact_step(&self) -> Option<usize> {
        self.truth.iter().position(|t| t.pressure > 0.0)
    }

    /// Check the length invariants.
    pub fn validate(&self) -> Result<()> {
        let n = self.actions.len();
        if self.observations.len() != n + 1 || self.truth.len() != n + 1 {
            return Err(Error::Dataset(format!(
                "trace lengths inconsistent: {} observations, {} actions, {} truth rows",
                self.observations.len(),
                n,
                self.truth.len()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TaskState {
    Wipe(WipeState),
    Pick(PickState),
}

/// A seeded environment instance.
#[derive(Clone, Debug)]
pub struct Env {
    pub cfg: EnvConfig,
    pub seed: u64,
    pub state: TaskState,
    pub step: usize,
    pub terminated: bool,
}

impl Env {
    pub fn reset(task: Task, cfg: &EnvConfig, seed: u64) -> (Env, Observation) {
        let state = match task {
            Task::Wipe => TaskState::Wipe(WipeState::reset(cfg, seed)),
            Task::Pick => TaskState::Pick(PickState::reset(cfg, seed)),
        };
        let env = Env { cfg: cfg.clone(), seed, state, step: 0, terminated: false };
        let obs = env.observe();
        (env, obs)
    }

    /// Reset from a task name; unknown names are an error.
    pub fn reset_named(task: &str, cfg: &EnvConfig, seed: u64) -> Result<(Env, Observation)> {
        Ok(Env::reset(task.parse()?, cfg, seed))
    }

    pub fn task(&self) -> Task {
        match self.state {
            TaskState::Wipe(_) => Task::Wipe,
            TaskState::Pick(_) => Task::Pick,
        }
    }

    /// Advance one step. Actions are clamped, never rejected. Stepping a
    /// terminated environment is a no-op that returns the current observation.
    pub fn step(&mut self, action: &ActionCommand) -> (Observation, bool) {
        if !self.terminated {
            let a = action.clamped(self.cfg.delta_limit);
            self.step += 1;
            let done = match &mut self.state {
                TaskState::Wipe(s) => s.step(&self.cfg, &a),
                TaskState::Pick(s) => s.step(&self.cfg, &a),
            };
            self.terminated = done || self.step >= self.cfg.step_cap;
        }
        (self.observe(), self.terminated)
    }

    pub fn observe(&self) -> Observation {
        match &self.state {
            TaskState::Wipe(s) => s.observe(&self.cfg, self.seed, self.step),
            TaskState::Pick(s) => s.observe(&self.cfg, self.seed, self.step),
        }
    }

    pub fn truth(&self) -> Truth {
        match &self.state {
            TaskState::Wipe(s) => s.truth(&self.cfg),
            TaskState::Pick(s) => s.truth(),
        }
    }

    /// Privileged scripted controller.
    pub fn expert_action(&self, rng: &mut ChaCha8Rng) -> ActionCommand {
        match &self.state {
            TaskState::Wipe(s) => s.expert(&self.cfg, rng),
            TaskState::Pick(s) => s.expert(&self.cfg, rng),
        }
    }
}

pub(crate) fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f32 {
    let z: f64 = rng.sample(StandardNormal);
    (z * sigma) as f32
}

/// Roll out the scripted expert from `reset(task, seed)` until termination and
/// label the outcome with the task's classifier. Pick episodes are labelled
/// against `demo_stats` when given, otherwise against the expert's own force target.
pub fn run_expert_episode(task: Task, cfg: &EnvConfig, seed: u64, demo_stats: Option<&DemoForceStats>) -> Result<EpisodeTrace> {
    let (mut env, obs) = Env::reset(task, cfg, seed);
    let mut rng = rng_for(seed, "expert");
    let mut trace = EpisodeTrace::new(task, seed, obs, env.truth());
    while !env.terminated {
        let a = env.expert_action(&mut rng).clamped(cfg.delta_limit);
        let (obs, _) = env.step(&a);
        trace.push(a, obs, env.truth());
    }
    trace.terminated = true;
    let outcome = match task {
        Task::Wipe => classify_outcome_wipe(&trace, cfg)?,
        Task::Pick => {
            let own;
            let stats = match demo_stats {
                Some(s) => s,
                None => {
                    own = DemoForceStats::expected_for(cfg);
                    &own
                }
            };
            classify_outcome_pick(&trace, stats, cfg)?
        }
    };
    trace.outcome = Some(outcome);
    Ok(trace)
}
