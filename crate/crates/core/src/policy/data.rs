use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::simenv::{ActionCommand, EpisodeTrace, Observation, ACTION_DIM, PROPRIO_DIM};
use crate::tactile::dynamic_feature_window;
use crate::vision::augment_window;

use super::model::{ObsBatch, PolicyConfig};
use super::normalize::MinMax;

/// Normalization statistics fitted on a demonstration set.
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats {
    pub action: MinMax,
    pub proprio: MinMax,
}

impl NormStats {
    /// Fit over every action and observation, plus the zero action used to pad chunks.
    pub fn fit(traces: &[EpisodeTrace]) -> Self {
        let zero = [0.0f32; ACTION_DIM];
        let actions = traces.iter().flat_map(|t| t.actions.iter().map(|a| &a.0[..])).chain(std::iter::once(&zero[..]));
        let proprio = traces.iter().flat_map(|t| t.observations.iter().map(|o| &o.proprio[..]));
        Self { action: MinMax::fit(ACTION_DIM, actions), proprio: MinMax::fit(PROPRIO_DIM, proprio) }
    }
}

/// Observation window ending at step `t`; indices before 0 repeat the first frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Window {
    pub vision: Vec<Vec<f32>>,
    pub tactile_l: Vec<Vec<f32>>,
    pub tactile_r: Vec<Vec<f32>>,
    pub fdyn: Vec<f32>,
    pub proprio: Vec<f32>,
}

fn back_indices(t: usize, n: usize) -> impl Iterator<Item = usize> {
    (0..n).map(move |k| (t + k + 1).saturating_sub(n))
}

pub fn observation_window(history: &[Observation], t: usize, cfg: &PolicyConfig, norm: &NormStats) -> Result<Window> {
    if t >= history.len() {
        return Err(Error::OutOfRange(format!("window end {t} beyond {} observations", history.len())));
    }
    let vision = back_indices(t, cfg.obs_horizon).map(|i| history[i].vision.clone()).collect();
    let mut proprio: Vec<f32> = back_indices(t, cfg.obs_horizon).flat_map(|i| history[i].proprio).collect();
    norm.proprio.normalize(&mut proprio);
    let tactile_l: Vec<Vec<f32>> = back_indices(t, cfg.tactile_horizon).map(|i| history[i].tactile_l.clone()).collect();
    let tactile_r: Vec<Vec<f32>> = back_indices(t, cfg.tactile_horizon).map(|i| history[i].tactile_r.clone()).collect();
    let fdyn = if cfg.variant.uses_dynamic() {
        dynamic_feature_window(&[&tactile_l[..], &tactile_r[..]], cfg.tau)?
    } else {
        vec![0.0; cfg.dyn_len()]
    };
    Ok(Window { vision, tactile_l, tactile_r, fdyn, proprio })
}

/// Normalized chunk of `cfg.chunk` actions starting at `t`, zero-action padded.
pub fn action_chunk(actions: &[ActionCommand], t: usize, cfg: &PolicyConfig, norm: &NormStats) -> Vec<f32> {
    let mut out: Vec<f32> = (t..t + cfg.chunk).flat_map(|i| actions.get(i).map_or([0.0; ACTION_DIM], |a| a.0)).collect();
    norm.action.normalize(&mut out);
    out
}

/// Stack windows into batch tensors, optionally augmenting the vision frames.
pub fn build_obs_batch(windows: &[Window], cfg: &PolicyConfig, mut augment: Option<&mut ChaCha8Rng>) -> Result<ObsBatch> {
    let b = windows.len();
    let (v, s) = (cfg.vision_size, cfg.tactile_size);
    let mut vision = Vec::with_capacity(b * cfg.obs_horizon * v * v);
    let mut tl = Vec::new();
    let mut tr = Vec::new();
    let mut fdyn = Vec::with_capacity(b * cfg.dyn_len());
    let mut proprio = Vec::with_capacity(b * cfg.proprio_len());
    for w in windows {
        match augment.as_deref_mut() {
            Some(rng) => augment_window(&w.vision, v, rng).iter().for_each(|f| vision.extend_from_slice(f)),
            None => w.vision.iter().for_each(|f| vision.extend_from_slice(f)),
        }
        if cfg.variant.uses_tactile() {
            w.tactile_l.iter().for_each(|f| tl.extend_from_slice(f));
            w.tactile_r.iter().for_each(|f| tr.extend_from_slice(f));
        }
        fdyn.extend_from_slice(&w.fdyn);
        proprio.extend_from_slice(&w.proprio);
    }
    let tactile = |data: Vec<f32>| -> Result<Option<Tensor>> {
        if cfg.variant.uses_tactile() {
            Ok(Some(Tensor::new(&[b * cfg.tactile_horizon, 1, s, s], data)?))
        } else {
            Ok(None)
        }
    };
    Ok(ObsBatch {
        b,
        vision: Tensor::new(&[b * cfg.obs_horizon, 1, v, v], vision)?,
        tactile_l: tactile(tl)?,
        tactile_r: tactile(tr)?,
        fdyn: Tensor::new(&[b, cfg.dyn_len()], fdyn)?,
        proprio: Tensor::new(&[b, cfg.proprio_len()], proprio)?,
    })
}
