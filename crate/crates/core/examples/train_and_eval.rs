//! Short training run followed by closed-loop evaluation.
//! Usage: train_and_eval [wipe|pick] [variant] [epochs]

use gelfusion::data_io::load_dataset;
use gelfusion::fusion::Variant;
use gelfusion::harness::{self, RunConfig};
use gelfusion::simenv::{Outcome, Task};

fn main() -> gelfusion::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut cfg = RunConfig::default();
    cfg.policy.task = args.get(1).map_or(Ok(Task::Wipe), |s| s.parse())?;
    cfg.policy.variant = args.get(2).map_or(Ok(Variant::Full), |s| s.parse())?;
    cfg.train.epochs = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3);
    cfg.n_demos = 10;
    cfg.episodes = 5;
    cfg.finalize()?;

    let dir = std::env::temp_dir().join("gelfusion_train_example");
    harness::gen_demos(cfg.task(), cfg.n_demos, cfg.demo_seed0, &cfg.env, &dir.join("demos"))?;
    let data = load_dataset(&dir.join("demos"))?;
    let ckpt = dir.join("policy.gfck");
    let trainer = harness::train(&cfg, &data, &ckpt, &dir.join("loss.csv"))?;
    println!("trained {} steps", trainer.step());
    print!("{}", std::fs::read_to_string(dir.join("loss.csv"))?);

    let s = harness::eval_path(&ckpt, cfg.policy.variant, cfg.episodes, cfg.eval_seed0, "example", None)?;
    println!("{}: success {:.2}", s.label, s.success_rate());
    for o in Outcome::ALL {
        println!("  {:<12}{}", o.as_str(), s.count(o));
    }
    if let Some(w) = s.contact_weights {
        println!("mean contact weights v/l/r {:.3} {:.3} {:.3}", w[0], w[1], w[2]);
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
