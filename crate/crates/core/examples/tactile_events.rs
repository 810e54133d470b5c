//! Dynamic tactile statistics and hysteresis contact detection on a wipe pass.

use gelfusion::simenv::{run_expert_episode, EnvConfig, Task};
use gelfusion::tactile::{contact_events, merged_series, EventParams};

fn main() -> gelfusion::Result<()> {
    let cfg = EnvConfig::default();
    for seed in 0..5 {
        let t = run_expert_episode(Task::Wipe, &cfg, seed, None)?;
        let left: Vec<_> = t.observations.iter().map(|o| o.tactile_l.clone()).collect();
        let right: Vec<_> = t.observations.iter().map(|o| o.tactile_r.clone()).collect();
        let series = merged_series(&left, &right, cfg.tau)?;
        let events = contact_events(&series, &EventParams::default());
        let peak = series.iter().map(|s| s.var).fold(0.0, f64::max);
        println!("seed {seed}: first contact {:?}, events {events:?}, peak variance {peak:.3}", t.first_contact_step());
    }
    Ok(())
}
