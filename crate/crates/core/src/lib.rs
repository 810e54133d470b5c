//! Visuotactile imitation learning: a synthetic wiping / fragile-pick simulator,
//! a dual-channel tactile representation, vision-led cross-attention fusion and
//! a conditional diffusion policy, all on a small CPU tensor stack.

pub mod data_io;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod numerics;
pub mod policy;
pub mod simenv;
pub mod tactile;
pub mod vision;

pub use error::{Error, Result};
pub use harness as harness_cli;
pub use tactile as tactile_encoder;
pub use vision as vision_encoder;
