//! Conditional diffusion policy over action chunks.

pub mod data;
pub mod denoiser;
pub mod model;
pub mod normalize;
pub mod rollout;
pub mod rot6d;
pub mod schedule;
pub mod train;

pub use data::{action_chunk, build_obs_batch, observation_window, NormStats, Window};
pub use denoiser::Denoiser;
pub use model::{ObsBatch, PolicyConfig, PolicyModel};
pub use normalize::MinMax;
pub use rollout::{rollout_receding_horizon, Rollout};
pub use schedule::{ddpm_sample, timestep_embedding, DiffusionSchedule};
pub use train::{Dataset, TrainConfig, Trainer};
