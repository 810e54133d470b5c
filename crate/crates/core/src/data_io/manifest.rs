use std::path::{Path, PathBuf};

use super::container::write_atomic;
use super::episode::load_episode;
use super::kv::parse_kv;
use crate::error::{Error, Result};
use crate::policy::{MinMax, NormStats};
use crate::simenv::{DemoForceStats, EnvConfig, EpisodeTrace, Task, ACTION_DIM, PROPRIO_DIM};

pub const MANIFEST_FILE: &str = "manifest.txt";

/// Index of a demonstration directory.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub task: Task,
    pub seed0: u64,
    /// `(file name, episode seed)` in training order.
    pub episodes: Vec<(String, u64)>,
    pub env: EnvConfig,
    pub force: Option<DemoForceStats>,
    pub norm: NormStats,
}

fn join(v: &[f32]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn split(line: usize, v: &str, dim: usize) -> Result<Vec<f32>> {
    let out: Vec<f32> = v
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| Error::Parse { line, msg: format!("bad number {s:?}") }))
        .collect::<Result<_>>()?;
    if out.len() != dim {
        return Err(Error::Parse { line, msg: format!("expected {dim} values, found {}", out.len()) });
    }
    Ok(out)
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        let mut s = String::from("# gelfusion dataset manifest\n");
        s += &format!("task={}\nseed0={}\ncount={}\n", self.task.as_str(), self.seed0, self.episodes.len());
        if let Some(f) = self.force {
            s += &format!("force_mean={}\nforce_count={}\n", f.mean, f.count);
        }
        s += &format!("norm.action_min={}\nnorm.action_max={}\n", join(&self.norm.action.min), join(&self.norm.action.max));
        s += &format!("norm.proprio_min={}\nnorm.proprio_max={}\n", join(&self.norm.proprio.min), join(&self.norm.proprio.max));
        for (k, v) in self.env.to_pairs() {
            s += &format!("{k}={v}\n");
        }
        for (file, seed) in &self.episodes {
            s += &format!("episode={file},{seed}\n");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut task = None;
        let mut seed0 = 0;
        let mut count = None;
        let (mut fmean, mut fcount) = (None, None);
        let mut norm = [vec![0.0; ACTION_DIM], vec![0.0; ACTION_DIM], vec![0.0; PROPRIO_DIM], vec![0.0; PROPRIO_DIM]];
        let mut env = EnvConfig::default();
        let mut episodes = Vec::new();
        let bad = |line: usize, msg: String| Error::Parse { line, msg };
        for (line, (k, v)) in parse_kv(text)? {
            match k.as_str() {
                "task" => task = Some(v.parse::<Task>().map_err(|e| bad(line, e.to_string()))?),
                "seed0" => seed0 = v.parse().map_err(|_| bad(line, format!("bad seed {v:?}")))?,
                "count" => count = Some(v.parse::<usize>().map_err(|_| bad(line, format!("bad count {v:?}")))?),
                "force_mean" => fmean = Some(v.parse::<f64>().map_err(|_| bad(line, format!("bad force mean {v:?}")))?),
                "force_count" => fcount = Some(v.parse::<usize>().map_err(|_| bad(line, format!("bad force count {v:?}")))?),
                "norm.action_min" => norm[0] = split(line, &v, ACTION_DIM)?,
                "norm.action_max" => norm[1] = split(line, &v, ACTION_DIM)?,
                "norm.proprio_min" => norm[2] = split(line, &v, PROPRIO_DIM)?,
                "norm.proprio_max" => norm[3] = split(line, &v, PROPRIO_DIM)?,
                "episode" => {
                    let (f, s) = v.rsplit_once(',').ok_or_else(|| bad(line, "episode entry needs file,seed".into()))?;
                    episodes.push((f.trim().to_string(), s.trim().parse().map_err(|_| bad(line, format!("bad seed {s:?}")))?));
                }
                _ => {
                    if !env.set(&k, &v).map_err(|m| bad(line, m))? {
                        return Err(bad(line, format!("unknown key {k:?}")));
                    }
                }
            }
        }
        let task = task.ok_or_else(|| bad(0, "missing task".into()))?;
        if count != Some(episodes.len()) {
            return Err(Error::Dataset(format!("count {count:?} but {} episode entries", episodes.len())));
        }
        let force = match (fmean, fcount) {
            (Some(mean), Some(count)) => Some(DemoForceStats { mean, count }),
            _ => None,
        };
        let [amin, amax, pmin, pmax] = norm;
        Ok(Self {
            task,
            seed0,
            episodes,
            env,
            force,
            norm: NormStats { action: MinMax { min: amin, max: amax }, proprio: MinMax { min: pmin, max: pmax } },
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join(MANIFEST_FILE), self.to_text().as_bytes())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)
    }
}

/// Loaded demonstrations plus any drift between episode and manifest snapshots.
#[derive(Clone, Debug)]
pub struct LoadedDataset {
    pub dir: PathBuf,
    pub manifest: DatasetManifest,
    pub traces: Vec<EpisodeTrace>,
    pub warnings: Vec<String>,
}

pub fn load_dataset(dir: &Path) -> Result<LoadedDataset> {
    let manifest = DatasetManifest::load(dir)?;
    let mut traces = Vec::with_capacity(manifest.episodes.len());
    let mut warnings = Vec::new();
    for (file, seed) in &manifest.episodes {
        let (t, env) = load_episode(&dir.join(file))?;
        if t.task != manifest.task || t.seed != *seed {
            return Err(Error::Dataset(format!("{file}: task/seed disagree with the manifest")));
        }
        if env != manifest.env {
            warnings.push(format!("{file}: env config differs from the manifest snapshot"));
        }
        traces.push(t);
    }
    Ok(LoadedDataset { dir: dir.to_path_buf(), manifest, traces, warnings })
}
