use super::config::EnvConfig;
use super::render::{render_tactile, Side};
use super::{EpisodeTrace, Outcome, Task};
use crate::error::{Error, Result};

/// Chip lift height that counts as picked.
const LIFTED: f32 = 0.15;

/// Demonstration-set statistics of the tactile force proxy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DemoForceStats {
    pub mean: f64,
    pub count: usize,
}

impl DemoForceStats {
    pub fn from_proxies(values: &[f64]) -> Self {
        let mean = if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / values.len() as f64 };
        Self { mean, count: values.len() }
    }

    /// Proxy of a noiseless render at the mid-band force target.
    pub fn expected_for(cfg: &EnvConfig) -> Self {
        let quiet = EnvConfig { sigma_tactile: 0.0, ..cfg.clone() };
        let f = cfg.force_target();
        let mut total = 0.0;
        for side in [Side::Left, Side::Right] {
            let base = render_tactile(&quiet, 0.0, (0.0, 0.0), side, 0);
            let frame = render_tactile(&quiet, f, (0.0, 0.0), side, 0);
            total += changed_fraction(&frame, &base, cfg.tau);
        }
        Self { mean: total / 2.0, count: 1 }
    }

    fn check(&self) -> Result<()> {
        if self.count == 0 || !(self.mean > 0.0) {
            return Err(Error::EmptyStats);
        }
        Ok(())
    }
}

fn changed_fraction(frame: &[f32], base: &[f32], tau: f64) -> f64 {
    let n = frame.iter().zip(base).filter(|(a, b)| (**a - **b).abs() as f64 > tau).count();
    n as f64 / frame.len() as f64
}

/// Maximum over steps of the mean binarized background-subtracted tactile
/// frame, averaged over both sensors. The background is the first frame.
pub fn force_proxy(trace: &EpisodeTrace, tau: f64) -> f64 {
    let first = &trace.observations[0];
    trace
        .observations
        .iter()
        .map(|o| 0.5 * (changed_fraction(&o.tactile_l, &first.tactile_l, tau) + changed_fraction(&o.tactile_r, &first.tactile_r, tau)))
        .fold(0.0, f64::max)
}

pub fn classify_outcome_wipe(trace: &EpisodeTrace, cfg: &EnvConfig) -> Result<Outcome> {
    if !trace.terminated {
        return Err(Error::NotTerminated);
    }
    let damaged = trace.truth.iter().any(|t| t.damaged || t.pressure as f64 > cfg.p_break);
    let slid = trace.truth.iter().any(|t| t.shear_px as f64 > cfg.shear_limit_px());
    Ok(wipe_outcome_from(damaged || slid, trace.residual_fraction() as f64, cfg.float_residual))
}

/// Wipe labelling from summary values.
pub fn wipe_outcome_from(overpressed: bool, residual: f64, float_residual: f64) -> Outcome {
    if overpressed {
        Outcome::Overpressed
    } else if residual > float_residual {
        Outcome::Float
    } else {
        Outcome::Success
    }
}

pub fn classify_outcome_pick(trace: &EpisodeTrace, stats: &DemoForceStats, cfg: &EnvConfig) -> Result<Outcome> {
    if !trace.terminated {
        return Err(Error::NotTerminated);
    }
    let broken = trace.truth.iter().any(|t| t.damaged);
    let lifted = trace.truth.last().is_some_and(|t| t.progress >= LIFTED);
    pick_outcome_from(force_proxy(trace, cfg.tau), broken, lifted, stats, cfg.force_tolerance)
}

/// Pick labelling from summary values: a broken chip dominates; a proxy off the
/// demonstration mean by more than `tol` is TooGentle below and Overpressed above;
/// an unlifted chip is TooGentle.
pub fn pick_outcome_from(proxy: f64, broken: bool, lifted: bool, stats: &DemoForceStats, tol: f64) -> Result<Outcome> {
    stats.check()?;
    if broken {
        return Ok(Outcome::Broken);
    }
    let rel = (proxy - stats.mean) / stats.mean;
    Ok(if rel.abs() > tol {
        if rel < 0.0 {
            Outcome::TooGentle
        } else {
            Outcome::Overpressed
        }
    } else if !lifted {
        Outcome::TooGentle
    } else {
        Outcome::Success
    })
}

pub fn classify_outcome(trace: &EpisodeTrace, cfg: &EnvConfig, stats: Option<&DemoForceStats>) -> Result<Outcome> {
    match trace.task {
        Task::Wipe => classify_outcome_wipe(trace, cfg),
        Task::Pick => classify_outcome_pick(trace, stats.ok_or(Error::EmptyStats)?, cfg),
    }
}
