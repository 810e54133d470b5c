use std::path::Path;

use super::container::{find, read_container, write_container, Record, DATASET_MAGIC};
use super::kv::{format_pairs, parse_kv};
use crate::error::{Error, Result};
use crate::simenv::{ActionCommand, EnvConfig, EpisodeTrace, Observation, Outcome, Task, Truth, ACTION_DIM, PROPRIO_DIM};

const NO_OUTCOME: u32 = u32::MAX;

fn task_code(t: Task) -> u32 {
    match t {
        Task::Wipe => 0,
        Task::Pick => 1,
    }
}

fn frame_side(frame_len: usize) -> Result<usize> {
    let s = (frame_len as f64).sqrt().round() as usize;
    if s * s != frame_len {
        return Err(Error::Dataset(format!("frame of {frame_len} values is not square")));
    }
    Ok(s)
}

/// Records for one trace plus the env snapshot it was produced under.
pub fn episode_records(trace: &EpisodeTrace, env: &EnvConfig) -> Result<Vec<Record>> {
    trace.validate()?;
    if !trace.terminated {
        return Err(Error::NotTerminated);
    }
    let n = trace.len();
    let obs = &trace.observations;
    let v = frame_side(obs[0].vision.len())?;
    let s = frame_side(obs[0].tactile_l.len())?;
    let stack = |f: fn(&Observation) -> &[f32]| obs.iter().flat_map(|o| f(o).iter().copied()).collect::<Vec<f32>>();
    let meta = vec![
        task_code(trace.task),
        trace.seed as u32,
        (trace.seed >> 32) as u32,
        trace.terminated as u32,
        trace.outcome.map_or(NO_OUTCOME, |o| o.code()),
        n as u32,
    ];
    let truth: Vec<f32> = trace.truth.iter().flat_map(|t| [t.pressure, t.progress, t.shear_px, t.damaged as u8 as f32]).collect();
    Ok(vec![
        Record::u32("meta", meta),
        Record::f32("vision", &[n + 1, v, v], stack(|o| &o.vision)),
        Record::f32("tactile_l", &[n + 1, s, s], stack(|o| &o.tactile_l)),
        Record::f32("tactile_r", &[n + 1, s, s], stack(|o| &o.tactile_r)),
        Record::f32("proprio", &[n + 1, PROPRIO_DIM], stack(|o| &o.proprio)),
        Record::f32("actions", &[n, ACTION_DIM], trace.actions.iter().flat_map(|a| a.0).collect()),
        Record::f32("truth", &[n + 1, 4], truth),
        Record::text("env", &format_pairs(&env.to_pairs())),
    ])
}

pub fn save_episode(path: &Path, trace: &EpisodeTrace, env: &EnvConfig) -> Result<()> {
    write_container(path, &DATASET_MAGIC, &episode_records(trace, env)?)
}

fn frames(r: &Record, n: usize) -> Result<Vec<Vec<f32>>> {
    let data = r.as_f32()?;
    if r.dims.len() != 3 || r.dims[0] != n {
        return Err(Error::CorruptContainer(format!("record {:?} has dims {:?}", r.name, r.dims)));
    }
    Ok(data.chunks_exact(r.dims[1] * r.dims[2]).map(|c| c.to_vec()).collect())
}

/// Load a trace and the env snapshot stored with it.
pub fn load_episode(path: &Path) -> Result<(EpisodeTrace, EnvConfig)> {
    let recs = read_container(path, &DATASET_MAGIC)?;
    let meta = find(&recs, "meta")?.as_u32()?;
    if meta.len() != 6 {
        return Err(Error::CorruptContainer("meta record length".into()));
    }
    let task = match meta[0] {
        0 => Task::Wipe,
        1 => Task::Pick,
        c => return Err(Error::CorruptContainer(format!("task code {c}"))),
    };
    let n = meta[5] as usize;
    let vision = frames(find(&recs, "vision")?, n + 1)?;
    let tl = frames(find(&recs, "tactile_l")?, n + 1)?;
    let tr = frames(find(&recs, "tactile_r")?, n + 1)?;
    let proprio = find(&recs, "proprio")?.as_f32()?;
    let actions = find(&recs, "actions")?.as_f32()?;
    let truth = find(&recs, "truth")?.as_f32()?;
    if proprio.len() != (n + 1) * PROPRIO_DIM || actions.len() != n * ACTION_DIM || truth.len() != (n + 1) * 4 {
        return Err(Error::CorruptContainer("series lengths disagree with step count".into()));
    }
    let observations = vision
        .into_iter()
        .zip(tl)
        .zip(tr)
        .zip(proprio.chunks_exact(PROPRIO_DIM))
        .map(|(((vision, tactile_l), tactile_r), p)| Observation { vision, tactile_l, tactile_r, proprio: p.try_into().unwrap() })
        .collect();
    let outcome = match meta[4] {
        NO_OUTCOME => None,
        c => Some(Outcome::from_code(c).ok_or_else(|| Error::CorruptContainer(format!("outcome code {c}")))?),
    };
    let trace = EpisodeTrace {
        task,
        seed: meta[1] as u64 | (meta[2] as u64) << 32,
        observations,
        actions: actions.chunks_exact(ACTION_DIM).map(|a| ActionCommand(a.try_into().unwrap())).collect(),
        truth: truth
            .chunks_exact(4)
            .map(|t| Truth { pressure: t[0], progress: t[1], shear_px: t[2], damaged: t[3] != 0.0 })
            .collect(),
        terminated: meta[3] != 0,
        outcome,
    };
    let mut env = EnvConfig::default();
    for (line, (k, v)) in parse_kv(find(&recs, "env")?.as_text()?)? {
        if !env.set(&k, &v).map_err(|msg| Error::Parse { line, msg })? {
            return Err(Error::Parse { line, msg: format!("unknown key {k:?}") });
        }
    }
    Ok((trace, env))
}
