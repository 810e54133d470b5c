use crate::error::Result;
use crate::numerics::{rng_for, Graph, ParamStore, Tensor};
use crate::simenv::{classify_outcome, ActionCommand, DemoForceStats, EnvConfig, Env, EpisodeTrace, ACTION_DIM};

use super::data::{build_obs_batch, observation_window, NormStats};
use super::model::PolicyModel;
use super::schedule::{ddpm_sample, timestep_embedding};

/// Closed-loop episode plus the fusion weights seen at each replanning step.
#[derive(Clone, Debug)]
pub struct Rollout {
    pub trace: EpisodeTrace,
    /// `(step, [w_v, w_l, w_r])` for cross-attention variants.
    pub weights: Vec<(usize, [f32; 3])>,
}

/// Sample a chunk of raw actions for the window ending at the last observation.
pub fn predict_chunk(
    model: &PolicyModel,
    params: &ParamStore<f32>,
    norm: &NormStats,
    history: &[crate::simenv::Observation],
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<(Vec<ActionCommand>, Option<[f32; 3]>)> {
    let cfg = &model.cfg;
    let w = observation_window(history, history.len() - 1, cfg, norm)?;
    let obs = build_obs_batch(std::slice::from_ref(&w), cfg, None)?;
    let mut g = Graph::new();
    let (cond, weights) = model.condition(&mut g, params, &obs)?;
    let cond: Tensor = g.value(cond);
    let weights = weights.map(|v| {
        let d = g.data(v);
        [d[0], d[1], d[2]]
    });
    let n = cfg.chunk_len();
    let tdim = model.denoiser.time_dim;
    let mut x = ddpm_sample(&model.schedule, n, rng, |x, t| {
        let mut g = Graph::new();
        let xt = g.input(Tensor::new(&[1, n], x.to_vec())?);
        let temb = g.input(Tensor::new(&[1, tdim], timestep_embedding(t, tdim))?);
        let c = g.input(cond.clone());
        let eps = model.predict_eps(&mut g, params, xt, temb, c)?;
        Ok(g.data(eps).to_vec())
    })?;
    x.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
    norm.action.denormalize(&mut x);
    let actions = x.chunks(ACTION_DIM).map(|c| ActionCommand([c[0], c[1], c[2], c[3], c[4]])).collect();
    Ok((actions, weights))
}

/// Execute the first `exec_steps` actions of each predicted chunk, then replan,
/// until the environment terminates.
pub fn rollout_receding_horizon(
    model: &PolicyModel,
    params: &ParamStore<f32>,
    norm: &NormStats,
    env_cfg: &EnvConfig,
    seed: u64,
    stats: Option<&DemoForceStats>,
) -> Result<Rollout> {
    let (mut env, obs) = Env::reset(model.cfg.task, env_cfg, seed);
    let mut trace = EpisodeTrace::new(model.cfg.task, seed, obs, env.truth());
    let mut rng = rng_for(seed, "policy");
    let mut weights = Vec::new();
    while !env.terminated {
        let (chunk, w) = predict_chunk(model, params, norm, &trace.observations, &mut rng)?;
        if let Some(w) = w {
            weights.push((env.step, w));
        }
        for a in chunk.into_iter().take(model.cfg.exec_steps) {
            let a = a.clamped(env_cfg.delta_limit);
            let (obs, done) = env.step(&a);
            trace.push(a, obs, env.truth());
            if done {
                break;
            }
        }
    }
    trace.terminated = true;
    trace.outcome = Some(classify_outcome(&trace, env_cfg, stats)?);
    Ok(Rollout { trace, weights })
}
