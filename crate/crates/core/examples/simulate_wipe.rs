//! Scripted expert on the wipe task: pressure, ink and shear over one pass.

use gelfusion::simenv::{classify_outcome, run_expert_episode, EnvConfig, Task};

fn main() -> gelfusion::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = EnvConfig::default();
    let trace = run_expert_episode(Task::Wipe, &cfg, seed, None)?;
    println!("step  pressure  erased  shear_px");
    for (i, t) in trace.truth.iter().enumerate().step_by(10) {
        println!("{i:>4}  {:>8.3}  {:>6.3}  {:>8.2}", t.pressure, t.progress, t.shear_px);
    }
    println!("first contact at step {:?}", trace.first_contact_step());
    println!("residual ink {:.3}", trace.residual_fraction());
    println!("outcome {}", classify_outcome(&trace, &cfg, None)?.as_str());
    Ok(())
}
