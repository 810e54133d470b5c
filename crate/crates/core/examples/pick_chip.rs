//! Scripted expert on the chip pick task, labelled against the demo force band.

use gelfusion::simenv::{classify_outcome, force_proxy, run_expert_episode, DemoForceStats, EnvConfig, Task};

fn main() -> gelfusion::Result<()> {
    let cfg = EnvConfig::default();
    let demos: Vec<_> = (0..20).map(|s| run_expert_episode(Task::Pick, &cfg, s, None)).collect::<Result<_, _>>()?;
    let stats = DemoForceStats::from_proxies(&demos.iter().map(|t| force_proxy(t, cfg.tau)).collect::<Vec<_>>());
    println!("demo force proxy mean {:.4} over {} episodes", stats.mean, stats.count);
    for seed in 100..105 {
        let t = run_expert_episode(Task::Pick, &cfg, seed, Some(&stats))?;
        println!(
            "seed {seed}: {} steps, peak grip {:.3}, proxy {:.4}, lifted {:.3}, {}",
            t.len(),
            t.max_pressure(),
            force_proxy(&t, cfg.tau),
            t.truth.last().unwrap().progress,
            classify_outcome(&t, &cfg, Some(&stats))?.as_str()
        );
    }
    Ok(())
}
