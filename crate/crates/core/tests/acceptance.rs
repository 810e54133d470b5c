//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. Training both tasks twice dominates the runtime.

mod common;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use common::{checks, gradients as grad};
use gelfusion::data_io::{load_checkpoint, load_dataset, read_container, save_checkpoint, write_container, Checkpoint, Record, DATASET_MAGIC};
use gelfusion::fusion::Variant;
use gelfusion::harness::{self, EvalSummary, RunConfig};
use gelfusion::policy::{Dataset, PolicyConfig, PolicyModel, TrainConfig, Trainer};
use gelfusion::simenv::{EnvConfig, Outcome, Task};

type Check = Result<String, String>;

fn gradients() -> Check {
    let t0 = Instant::now();
    let n = 20;
    let worst = [
        ("vision", grad::vision_encoder(n)),
        ("tactile", grad::tactile_encoder(n)),
        ("cross-attn", grad::fusion(Variant::Full, n)),
        ("concat", grad::fusion(Variant::Concat, n)),
        ("self-attn", grad::fusion(Variant::SelfAttn, n)),
        ("denoiser", grad::denoiser(n)),
    ];
    let secs = t0.elapsed().as_secs_f64();
    let summary = worst.iter().map(|(k, e)| format!("{k} {e:.1e}")).collect::<Vec<_>>().join(", ");
    if worst.iter().all(|(_, e)| *e < 1e-3) && secs < 120.0 {
        Ok(format!("{summary}; {secs:.1}s"))
    } else {
        Err(format!("{summary}; {secs:.1}s"))
    }
}

fn ddpm() -> Check {
    let t0 = Instant::now();
    let moments = checks::q_sample_moments(10_000)?;
    let (steps, mse) = checks::overfit_single(2000, 0)?;
    let secs = t0.elapsed().as_secs_f64();
    if secs >= 300.0 {
        return Err(format!("took {secs:.1}s"));
    }
    Ok(format!("{moments}; overfit MSE {mse:.4} at step {steps}; {secs:.1}s"))
}

struct Ablation {
    metrics: PathBuf,
    demo_proxy: Option<f64>,
    full: EvalSummary,
    vision_only: EvalSummary,
    train_secs: [f64; 2],
}

/// Demos, training and shared-seed evaluation of full and vision-only on one task.
fn ablation(task: Task, root: &Path) -> Result<Ablation, String> {
    let e = |e: gelfusion::Error| e.to_string();
    let mut cfg = RunConfig::default();
    cfg.policy.task = task;
    cfg.finalize().map_err(e)?;
    let data_dir = root.join("demos");
    harness::gen_demos(task, cfg.n_demos, cfg.demo_seed0, &cfg.env, &data_dir).map_err(e)?;
    let data = load_dataset(&data_dir).map_err(e)?;
    let metrics = root.join("metrics.csv");
    let mut out = Vec::new();
    let mut train_secs = [0.0; 2];
    for (i, variant) in [Variant::Full, Variant::VisionOnly].into_iter().enumerate() {
        let mut c = cfg.clone();
        c.policy.variant = variant;
        let ckpt = root.join(format!("{}.gfck", variant.as_str()));
        let t0 = Instant::now();
        harness::train(&c, &data, &ckpt, &root.join(format!("{}_loss.csv", variant.as_str()))).map_err(e)?;
        train_secs[i] = t0.elapsed().as_secs_f64();
        let run_id = format!("{}-{}", task.as_str(), variant.as_str());
        out.push(harness::eval_path(&ckpt, variant, c.episodes, c.eval_seed0, &run_id, Some(&metrics)).map_err(e)?);
    }
    let vision_only = out.pop().unwrap();
    let full = out.pop().unwrap();
    Ok(Ablation { metrics, demo_proxy: data.manifest.force.map(|f| f.mean), full, vision_only, train_secs })
}

fn histogram(s: &EvalSummary) -> String {
    Outcome::ALL.iter().filter(|o| s.count(**o) > 0).map(|o| format!("{} {}", o.as_str(), s.count(*o))).collect::<Vec<_>>().join("/")
}

fn wipe_criterion(a: &Ablation) -> Check {
    let gap = 100.0 * (a.full.success_rate() - a.vision_only.success_rate());
    let both = a.vision_only.count(Outcome::Float) > 0 && a.vision_only.count(Outcome::Overpressed) > 0;
    let budget = a.train_secs.iter().all(|s| *s <= 3600.0);
    let msg = format!(
        "full {} vs vision-only {}; gap {gap:.0} pp; training {:.0}s / {:.0}s",
        histogram(&a.full),
        histogram(&a.vision_only),
        a.train_secs[0],
        a.train_secs[1]
    );
    if gap >= 20.0 && both && budget {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn pick_criterion(a: &Ablation) -> Check {
    let demo = a.demo_proxy.ok_or("dataset has no force statistics")?;
    let proxy = a.full.rows.iter().map(|r| r.force_proxy).sum::<f64>() / a.full.rows.len() as f64;
    let rel = (proxy - demo).abs() / demo;
    let msg = format!(
        "full {} vs vision-only {}; full proxy mean {proxy:.4} vs demo {demo:.4} ({:.1}%)",
        histogram(&a.full),
        histogram(&a.vision_only),
        100.0 * rel
    );
    if a.full.success_rate() >= a.vision_only.success_rate() && rel <= 0.2 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn same_bytes(a: &Path, b: &Path) -> Result<bool, String> {
    let read = |p: &Path| std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()));
    Ok(read(a)? == read(b)?)
}

fn determinism(first: &[(Task, &Ablation)], root: &Path) -> Check {
    for (task, a) in first {
        let again = ablation(*task, &root.join(format!("{}-repeat", task.as_str())))?;
        if !same_bytes(&a.metrics, &again.metrics)? {
            return Err(format!("{} metrics differ between identical runs", task.as_str()));
        }
    }
    Ok("wipe and pick metrics CSVs are byte-identical".into())
}

fn persistence(root: &Path) -> Check {
    let e = |e: gelfusion::Error| e.to_string();
    std::fs::create_dir_all(root).map_err(|e| e.to_string())?;
    let env = EnvConfig::default();
    let c1 = root.join("c1.gfds");
    let c2 = root.join("c2.gfds");
    let recs = vec![Record::f32("x", &[2, 2], vec![1.5, -0.0, f32::MIN_POSITIVE, 3.0]), Record::u32("n", vec![7, u32::MAX]), Record::text("t", "a=b")];
    write_container(&c1, &DATASET_MAGIC, &recs).map_err(e)?;
    let back = read_container(&c1, &DATASET_MAGIC).map_err(e)?;
    write_container(&c2, &DATASET_MAGIC, &back).map_err(e)?;
    if back != recs || !same_bytes(&c1, &c2)? {
        return Err("container round trip changed bytes".into());
    }

    let demos = root.join("demos");
    harness::gen_demos(Task::Wipe, 3, 0, &env, &demos).map_err(e)?;
    let data = Dataset::new(load_dataset(&demos).map_err(e)?.traces).map_err(e)?;
    let fresh = || Trainer::new(PolicyModel::new(PolicyConfig::new(Task::Wipe, Variant::Full)).unwrap(), TrainConfig { batch: 16, ..Default::default() });
    let mut straight = fresh();
    let mut head = fresh();
    for _ in 0..5 {
        straight.train_step(&data).map_err(e)?;
        head.train_step(&data).map_err(e)?;
    }
    let (k1, k2) = (root.join("k1.gfck"), root.join("k2.gfck"));
    save_checkpoint(&k1, &Checkpoint::from_trainer(&head, &data.norm, &env, None)).map_err(e)?;
    let ck = load_checkpoint(&k1).map_err(e)?;
    save_checkpoint(&k2, &ck).map_err(e)?;
    if !same_bytes(&k1, &k2)? {
        return Err("checkpoint round trip changed bytes".into());
    }
    let mut resumed = ck.into_trainer().map_err(e)?;
    for _ in 0..10 {
        straight.train_step(&data).map_err(e)?;
        resumed.train_step(&data).map_err(e)?;
    }
    let same = resumed.params.detached() == straight.params.detached() && resumed.ema.shadow == straight.ema.shadow && resumed.opt == straight.opt;
    if !same {
        return Err("resumed run diverged from the uninterrupted run".into());
    }
    Ok("container and checkpoint byte-exact; resume bitwise equal over 10 steps".into())
}

fn report(n: usize, name: &str, r: Check) -> bool {
    match r {
        Ok(msg) => {
            println!("PASS criterion {n} ({name}): {msg}");
            true
        }
        Err(msg) => {
            println!("FAIL criterion {n} ({name}): {msg}");
            false
        }
    }
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temp dir");
    let root = tmp.path();
    let mut ok = true;
    ok &= report(1, "gradient oracle", gradients());
    ok &= report(2, "fusion algebra", checks::fusion_algebra(10_000));
    ok &= report(3, "dynamic closed forms", checks::dynamic_closed_forms(1000));
    ok &= report(4, "contact events", checks::contact_event_lag(20));
    ok &= report(5, "ddpm sanity", ddpm());
    ok &= report(6, "rotation utilities", checks::rotation_round_trips(10_000));

    let wipe = ablation(Task::Wipe, &root.join("wipe"));
    ok &= report(7, "wipe ablation", wipe.as_ref().map_err(Clone::clone).and_then(wipe_criterion));
    let pick = ablation(Task::Pick, &root.join("pick"));
    ok &= report(8, "pick ablation", pick.as_ref().map_err(Clone::clone).and_then(pick_criterion));
    let det = match (&wipe, &pick) {
        (Ok(w), Ok(p)) => determinism(&[(Task::Wipe, w), (Task::Pick, p)], root),
        _ => Err("ablation runs failed".into()),
    };
    ok &= report(9, "determinism", det);
    ok &= report(10, "persistence", persistence(&root.join("persist")));

    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
