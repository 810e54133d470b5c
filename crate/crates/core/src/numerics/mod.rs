//! Dense tensors, a reverse-mode tape, AdamW/EMA, and a finite-difference oracle.

pub mod gradcheck;
pub mod graph;
pub mod ops;
pub mod optim;
pub mod params;
pub mod real;
pub mod tensor;

pub use gradcheck::{finite_diff_check, FdReport};
pub use graph::{Graph, Var};
pub use ops::{attention_pool, conv2d_forward, linear_forward, softmax};
pub use optim::{ema_decay_for_step, AdamWState, EmaState};
pub use params::{derive_seed, rng_for, Initializer, ParamStore};
pub use real::Real;
pub use tensor::Tensor;
