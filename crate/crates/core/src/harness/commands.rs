use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use crate::data_io::image::{to_u8, write_pgm};
use crate::data_io::{
    append_metrics, load_checkpoint, load_dataset, load_episode, save_checkpoint, save_episode, write_atomic, Checkpoint,
    DatasetManifest, LoadedDataset, MetricsRow,
};
use crate::error::{Error, Result};
use crate::fusion::Variant;
use crate::policy::{rollout_receding_horizon, Dataset, NormStats, PolicyModel, Trainer};
use crate::simenv::{force_proxy, run_expert_episode, DemoForceStats, EnvConfig, Outcome, Task};
use crate::tactile::{contact_events, merged_series, residual_binarize, sigma_series, EventKind, EventParams};

/// Generate `n` successful expert demonstrations starting at `seed0`. Failed
/// attempts are dropped and the next seed is tried.
pub fn gen_demos(task: Task, n: usize, seed0: u64, env: &EnvConfig, out_dir: &Path) -> Result<DatasetManifest> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    fs::create_dir_all(out_dir)?;
    let mut traces = Vec::with_capacity(n);
    let mut episodes = Vec::with_capacity(n);
    let mut seed = seed0;
    let max_tries = n as u64 * 10;
    while traces.len() < n {
        if seed - seed0 >= max_tries {
            return Err(Error::Dataset(format!("expert succeeded on only {} of {max_tries} seeds", traces.len())));
        }
        let t = run_expert_episode(task, env, seed, None)?;
        if t.outcome == Some(Outcome::Success) {
            let file = format!("ep_{:04}.gfds", traces.len());
            save_episode(&out_dir.join(&file), &t, env)?;
            episodes.push((file, seed));
            traces.push(t);
        }
        seed += 1;
    }
    let force = match task {
        Task::Pick => {
            let proxies: Vec<f64> = traces.iter().map(|t| force_proxy(t, env.tau)).collect();
            Some(DemoForceStats::from_proxies(&proxies))
        }
        Task::Wipe => None,
    };
    let manifest = DatasetManifest { task, seed0, episodes, env: env.clone(), force, norm: NormStats::fit(&traces) };
    manifest.save(out_dir)?;
    Ok(manifest)
}

fn check_dataset(cfg: &RunConfig, data: &LoadedDataset) -> Result<()> {
    if data.manifest.task != cfg.task() {
        return Err(Error::Dataset(format!(
            "dataset holds {} demos, config asks for {}",
            data.manifest.task.as_str(),
            cfg.task().as_str()
        )));
    }
    if data.manifest.env.vision_size != cfg.env.vision_size || data.manifest.env.tactile_size != cfg.env.tactile_size {
        return Err(Error::Dataset("frame sizes differ between dataset and config".into()));
    }
    Ok(())
}

/// Train end-to-end, writing the per-epoch loss CSV as it goes and the checkpoint at the end.
pub fn train(cfg: &RunConfig, data: &LoadedDataset, ckpt_path: &Path, loss_csv: &Path) -> Result<Trainer> {
    let mut cfg = cfg.clone();
    cfg.finalize()?;
    check_dataset(&cfg, data)?;
    let dataset = Dataset::new(data.traces.clone())?;
    let model = PolicyModel::new(cfg.policy.clone())?;
    let mut trainer = Trainer::new(model, cfg.train.clone());
    let mut csv = String::from("epoch,loss\n");
    trainer.fit(&dataset, |epoch, loss| {
        csv += &format!("{epoch},{}\n", crate::data_io::fmt6(loss as f64));
        write_atomic(loss_csv, csv.as_bytes())
    })?;
    let ckpt = Checkpoint::from_trainer(&trainer, &dataset.norm, &data.manifest.env, data.manifest.force);
    save_checkpoint(ckpt_path, &ckpt)?;
    Ok(trainer)
}

/// Label used in metrics and reports: the variant, suffixed with the tactile
/// horizon when it differs from 2.
pub fn arm_label(variant: Variant, horizon: usize) -> String {
    if horizon == 2 {
        variant.as_str().to_string()
    } else {
        format!("{}-h{horizon}", variant.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    pub label: String,
    pub rows: Vec<MetricsRow>,
    pub histogram: BTreeMap<Outcome, usize>,
    /// Mean `(w_v, w_tl, w_tr)` over replanning steps taken in contact.
    pub contact_weights: Option<[f64; 3]>,
}

impl EvalSummary {
    pub fn success_rate(&self) -> f64 {
        self.histogram.get(&Outcome::Success).copied().unwrap_or(0) as f64 / self.rows.len().max(1) as f64
    }

    pub fn count(&self, o: Outcome) -> usize {
        self.histogram.get(&o).copied().unwrap_or(0)
    }
}

fn mean3(w: &[[f32; 3]]) -> Option<[f64; 3]> {
    if w.is_empty() {
        return None;
    }
    let mut m = [0.0; 3];
    for v in w {
        for k in 0..3 {
            m[k] += v[k] as f64 / w.len() as f64;
        }
    }
    Some(m)
}

/// Roll out the EMA weights on `episodes` seeds from `seed0`, one metrics row each.
pub fn eval(ckpt: &Checkpoint, variant: Variant, episodes: usize, seed0: u64, run_id: &str, out_csv: Option<&Path>) -> Result<EvalSummary> {
    ckpt.expect_variant(variant)?;
    let model = ckpt.model()?;
    let stats = match ckpt.task() {
        Task::Pick => Some(ckpt.force.ok_or(Error::EmptyStats)?),
        Task::Wipe => None,
    };
    let label = arm_label(variant, model.cfg.tactile_horizon);
    let mut rows = Vec::with_capacity(episodes);
    let mut histogram = BTreeMap::new();
    let mut all_contact = Vec::new();
    for ep in 0..episodes {
        let seed = seed0 + ep as u64;
        let r = rollout_receding_horizon(&model, &ckpt.ema.shadow, &ckpt.norm, &ckpt.env, seed, stats.as_ref())?;
        let outcome = r.trace.outcome.expect("rollout labels its trace");
        *histogram.entry(outcome).or_insert(0) += 1;
        let contact: Vec<[f32; 3]> = r.weights.iter().filter(|(s, _)| r.trace.truth[*s].pressure > 0.0).map(|(_, w)| *w).collect();
        all_contact.extend_from_slice(&contact);
        let w = mean3(&contact).unwrap_or([f64::NAN; 3]);
        rows.push(MetricsRow {
            run_id: run_id.to_string(),
            task: ckpt.task().as_str().to_string(),
            variant: label.clone(),
            seed,
            episode: ep,
            outcome: outcome.as_str().to_string(),
            steps: r.trace.len(),
            max_pressure: r.trace.max_pressure() as f64,
            residual_fraction: r.trace.residual_fraction() as f64,
            force_proxy: force_proxy(&r.trace, ckpt.env.tau),
            w_v: w[0],
            w_tl: w[1],
            w_tr: w[2],
        });
    }
    if let Some(path) = out_csv {
        append_metrics(path, &rows)?;
    }
    Ok(EvalSummary { label, rows, histogram, contact_weights: mean3(&all_contact) })
}

pub fn eval_path(ckpt_path: &Path, variant: Variant, episodes: usize, seed0: u64, run_id: &str, out_csv: Option<&Path>) -> Result<EvalSummary> {
    eval(&load_checkpoint(ckpt_path)?, variant, episodes, seed0, run_id, out_csv)
}

/// The six ablation arms as `(variant, tactile horizon)`.
pub const SUITE_ARMS: [(Variant, usize); 6] = [
    (Variant::Full, 2),
    (Variant::VisionOnly, 2),
    (Variant::NoDynamic, 2),
    (Variant::Concat, 2),
    (Variant::SelfAttn, 2),
    (Variant::Full, 4),
];

#[derive(Clone, Debug, PartialEq)]
pub struct ArmReport {
    pub label: String,
    pub summary: Option<EvalSummary>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationReport {
    pub arms: Vec<ArmReport>,
}

pub const REPORT_HEADER: &str = "arm,episodes,success_rate,Success,Float,Overpressed,TooGentle,Broken,w_v,w_tl,w_tr,error";

impl AblationReport {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{REPORT_HEADER}\n");
        for a in &self.arms {
            match &a.summary {
                Some(e) => {
                    let w = e.contact_weights.unwrap_or([f64::NAN; 3]);
                    let counts: Vec<String> = Outcome::ALL.iter().map(|o| e.count(*o).to_string()).collect();
                    s += &format!(
                        "{},{},{},{},{},{},{},\n",
                        a.label,
                        e.rows.len(),
                        crate::data_io::fmt6(e.success_rate()),
                        counts.join(","),
                        crate::data_io::fmt6(w[0]),
                        crate::data_io::fmt6(w[1]),
                        crate::data_io::fmt6(w[2])
                    );
                }
                None => s += &format!("{},0,nan,0,0,0,0,0,nan,nan,nan,{}\n", a.label, a.error.as_deref().unwrap_or("").replace([',', '\n'], ";")),
            }
        }
        s
    }
}

/// Train and evaluate every arm on one dataset and one evaluation seed range.
/// A failing arm is recorded and the suite moves on.
pub fn suite(cfg: &RunConfig, data_dir: &Path, out_dir: &Path, mut log: impl FnMut(&str)) -> Result<AblationReport> {
    fs::create_dir_all(out_dir)?;
    let data = load_dataset(data_dir)?;
    data.warnings.iter().for_each(|w| log(&format!("warning: {w}")));
    let metrics = out_dir.join("metrics.csv");
    let mut arms = Vec::new();
    for (variant, horizon) in SUITE_ARMS {
        let label = arm_label(variant, horizon);
        let run = || -> Result<EvalSummary> {
            let mut c = cfg.clone();
            c.policy.variant = variant;
            c.policy.tactile_horizon = horizon;
            let ckpt_path = out_dir.join(format!("{label}.gfck"));
            train(&c, &data, &ckpt_path, &out_dir.join(format!("{label}_loss.csv")))?;
            eval_path(&ckpt_path, variant, c.episodes, c.eval_seed0, &label, Some(&metrics))
        };
        match run() {
            Ok(s) => {
                log(&format!("{label}: success {:.3} over {} episodes", s.success_rate(), s.rows.len()));
                arms.push(ArmReport { label, summary: Some(s), error: None });
            }
            Err(e) => {
                log(&format!("{label}: failed: {e}"));
                arms.push(ArmReport { label, summary: None, error: Some(e.to_string()) });
            }
        }
    }
    let report = AblationReport { arms };
    write_atomic(&out_dir.join("report.csv"), report.to_csv().as_bytes())?;
    if metrics.exists() {
        super::plot::plot(&metrics, out_dir)?;
    }
    Ok(report)
}

/// Files written by [`inspect`].
#[derive(Clone, Debug, PartialEq)]
pub struct InspectOutput {
    pub images: Vec<PathBuf>,
    pub series: PathBuf,
    pub events: PathBuf,
}

/// Dump one frame of an episode as PGM images plus the per-step dynamic
/// series and detected contact events as CSV.
pub fn inspect(episode: &Path, frame: usize, out_dir: &Path) -> Result<InspectOutput> {
    let (trace, env) = load_episode(episode)?;
    let obs = &trace.observations;
    if frame >= obs.len() {
        return Err(Error::OutOfRange(format!("frame {frame} of an episode with {} frames", obs.len())));
    }
    fs::create_dir_all(out_dir)?;
    let prev = &obs[frame.saturating_sub(1)];
    let cur = &obs[frame];
    let (v, s) = (env.vision_size, env.tactile_size);
    let grey = |f: &[f32]| f.iter().map(|x| to_u8(*x)).collect::<Vec<u8>>();
    let mut images = Vec::new();
    let mut put = |name: &str, side: usize, px: Vec<u8>| -> Result<()> {
        let p = out_dir.join(format!("{name}_{frame:04}.pgm"));
        write_pgm(&p, side, side, &px)?;
        images.push(p);
        Ok(())
    };
    put("vision", v, grey(&cur.vision))?;
    put("tactile_l", s, grey(&cur.tactile_l))?;
    put("tactile_r", s, grey(&cur.tactile_r))?;
    put("residual_l", s, grey(&residual_binarize(&cur.tactile_l, &prev.tactile_l, env.tau)?))?;
    put("residual_r", s, grey(&residual_binarize(&cur.tactile_r, &prev.tactile_r, env.tau)?))?;

    let left: Vec<&[f32]> = obs.iter().map(|o| &o.tactile_l[..]).collect();
    let right: Vec<&[f32]> = obs.iter().map(|o| &o.tactile_r[..]).collect();
    let (sl, sr) = (sigma_series(&left, env.tau)?, sigma_series(&right, env.tau)?);
    let mut series = String::from("step,mu_l,var_l,mu_r,var_r\n");
    for (i, (a, b)) in sl.iter().zip(&sr).enumerate() {
        series += &format!("{i},{},{},{},{}\n", a.mean, a.var, b.mean, b.var);
    }
    let mut events = String::from("step,event\n");
    for e in contact_events(&merged_series(&left, &right, env.tau)?, &EventParams::default()) {
        let kind = match e.kind {
            EventKind::Initiation => "initiation",
            EventKind::Cessation => "cessation",
        };
        events += &format!("{},{kind}\n", e.step);
    }
    let sp = out_dir.join("series.csv");
    let ep = out_dir.join("events.csv");
    write_atomic(&sp, series.as_bytes())?;
    write_atomic(&ep, events.as_bytes())?;
    Ok(InspectOutput { images, series: sp, events: ep })
}
