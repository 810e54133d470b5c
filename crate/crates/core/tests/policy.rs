mod common;

use common::checks;
use gelfusion::data_io::Checkpoint;
use gelfusion::fusion::Variant;
use gelfusion::policy::{rollout_receding_horizon, Dataset, PolicyConfig, PolicyModel, TrainConfig, Trainer};
use gelfusion::simenv::{run_expert_episode, EnvConfig, Task};

fn small_dataset(task: Task, n: u64) -> Dataset {
    let cfg = EnvConfig::default();
    Dataset::new((0..n).map(|s| run_expert_episode(task, &cfg, s, None).unwrap()).collect()).unwrap()
}

fn trainer(task: Task, variant: Variant, batch: usize) -> Trainer {
    let model = PolicyModel::new(PolicyConfig::new(task, variant)).unwrap();
    Trainer::new(model, TrainConfig { batch, epochs: 2, ..Default::default() })
}

#[test]
fn zero_network_loss_is_unit_per_coordinate() {
    let data = small_dataset(Task::Wipe, 4);
    let mut t = trainer(Task::Wipe, Variant::Full, 64);
    for name in ["den.out.w", "den.out.b"] {
        t.params.get_mut(name).unwrap().data_mut().fill(0.0);
    }
    let loss = t.train_step(&data).unwrap();
    assert!((loss - 1.0).abs() < 0.05, "{loss}");
}

#[test]
fn single_pair_overfits_within_budget() {
    let (steps, mse) = checks::overfit_single(2000, 3).unwrap();
    assert!(steps <= 2000 && mse < 0.05);
}

#[test]
fn q_sample_moments() {
    checks::q_sample_moments(10_000).unwrap();
}

#[test]
fn rollouts_are_deterministic_and_respect_exec_steps() {
    let data = small_dataset(Task::Wipe, 2);
    let mut t = trainer(Task::Wipe, Variant::Full, 16);
    t.train_step(&data).unwrap();
    let env = EnvConfig { step_cap: 40, ..EnvConfig::default() };
    let stats = None;
    let a = rollout_receding_horizon(&t.model, &t.params, &data.norm, &env, 9, stats).unwrap();
    let b = rollout_receding_horizon(&t.model, &t.params, &data.norm, &env, 9, stats).unwrap();
    assert_eq!(a.trace, b.trace);
    let steps: Vec<usize> = a.weights.iter().map(|(s, _)| *s).collect();
    assert!(steps.iter().enumerate().all(|(i, s)| *s == 8 * i), "{steps:?}");
    assert!(a.trace.len() > 16);
    assert_eq!(steps.len(), a.trace.len().div_ceil(8));

    let mut m16 = t.model.clone();
    m16.cfg.exec_steps = 16;
    let c = rollout_receding_horizon(&m16, &t.params, &data.norm, &env, 9, stats).unwrap();
    let steps: Vec<usize> = c.weights.iter().map(|(s, _)| *s).collect();
    assert!(steps.iter().enumerate().all(|(i, s)| *s == 16 * i), "{steps:?}");
    assert_eq!(steps.len(), c.trace.len().div_ceil(16));
}

#[test]
fn vision_only_has_no_tactile_parameters() {
    let t = trainer(Task::Wipe, Variant::VisionOnly, 8);
    assert!(t.params.names().all(|n| !n.starts_with("tac_") && !n.starts_with("fuse.")));
    let full = trainer(Task::Wipe, Variant::Full, 8);
    assert!(full.params.names().any(|n| n.starts_with("tac_l")) && full.params.contains("fuse.k.w"));
}

#[test]
fn resume_matches_uninterrupted_training() {
    let data = small_dataset(Task::Wipe, 3);
    let mut straight = trainer(Task::Wipe, Variant::Full, 16);
    for _ in 0..12 {
        straight.train_step(&data).unwrap();
    }
    let mut first = trainer(Task::Wipe, Variant::Full, 16);
    for _ in 0..2 {
        first.train_step(&data).unwrap();
    }
    let ck = Checkpoint::from_records(&Checkpoint::from_trainer(&first, &data.norm, &EnvConfig::default(), None).to_records()).unwrap();
    let mut resumed = ck.into_trainer().unwrap();
    for _ in 0..10 {
        resumed.train_step(&data).unwrap();
    }
    assert_eq!(resumed.step(), straight.step());
    assert_eq!(resumed.params.detached(), straight.params.detached());
    assert_eq!(resumed.ema.shadow, straight.ema.shadow);
    assert_eq!(resumed.opt, straight.opt);
}
