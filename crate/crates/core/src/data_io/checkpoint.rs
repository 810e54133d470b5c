use std::collections::BTreeMap;
use std::path::Path;

use super::container::{find, read_container, write_container, Record, CHECKPOINT_MAGIC};
use super::kv::{format_pairs, parse_kv};
use crate::error::{Error, Result};
use crate::numerics::{AdamWState, EmaState, ParamStore, Tensor};
use crate::policy::{MinMax, NormStats, PolicyConfig, PolicyModel, TrainConfig, Trainer};
use crate::simenv::{DemoForceStats, EnvConfig, Task};
use crate::fusion::Variant;

/// Everything needed to resume training or run evaluation.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub policy: PolicyConfig,
    pub train: TrainConfig,
    pub env: EnvConfig,
    pub norm: NormStats,
    pub force: Option<DemoForceStats>,
    pub params: ParamStore<f32>,
    pub ema: EmaState,
    pub opt: AdamWState,
}

impl Checkpoint {
    pub fn from_trainer(t: &Trainer, norm: &NormStats, env: &EnvConfig, force: Option<DemoForceStats>) -> Self {
        Self {
            policy: t.model.cfg.clone(),
            train: t.tcfg.clone(),
            env: env.clone(),
            norm: norm.clone(),
            force,
            params: t.params.detached(),
            ema: EmaState { shadow: t.ema.shadow.detached(), decay: t.ema.decay },
            opt: t.opt.clone(),
        }
    }

    pub fn into_trainer(self) -> Result<Trainer> {
        let model = PolicyModel::new(self.policy)?;
        let fresh = model.init_params(0);
        if !fresh.same_keys(&self.params) || !fresh.same_keys(&self.ema.shadow) {
            return Err(Error::KeyMismatch("checkpoint parameters do not match the configured model".into()));
        }
        Ok(Trainer { model, tcfg: self.train, params: self.params, opt: self.opt, ema: self.ema })
    }

    pub fn model(&self) -> Result<PolicyModel> {
        PolicyModel::new(self.policy.clone())
    }

    /// Refuse to serve a different variant than requested.
    pub fn expect_variant(&self, requested: Variant) -> Result<()> {
        if self.policy.variant != requested {
            return Err(Error::VariantMismatch { checkpoint: self.policy.variant.as_str().into(), requested: requested.as_str().into() });
        }
        Ok(())
    }

    pub fn task(&self) -> Task {
        self.policy.task
    }

    pub fn to_records(&self) -> Vec<Record> {
        let mut cfg = self.policy.to_pairs();
        cfg.extend(self.train.to_pairs());
        let mut demo = Vec::new();
        if let Some(f) = self.force {
            demo.push(("force_mean", f.mean.to_string()));
            demo.push(("force_count", f.count.to_string()));
        }
        let norm: Vec<f32> = [&self.norm.action, &self.norm.proprio].iter().flat_map(|m| m.min.iter().chain(&m.max).copied()).collect();
        let o = &self.opt;
        let mut recs = vec![
            Record::text("meta/config", &format_pairs(&cfg)),
            Record::text("meta/env", &format_pairs(&self.env.to_pairs())),
            Record::text("meta/demo", &format_pairs(&demo)),
            Record::f32("meta/norm", &[4, self.norm.action.dim()], norm),
            Record::u32("meta/adam_step", vec![o.step as u32, (o.step >> 32) as u32]),
            Record::f32("meta/adam", &[5], vec![o.lr, o.beta1, o.beta2, o.eps, o.weight_decay]),
            Record::f32("meta/ema_decay", &[1], vec![self.ema.decay]),
        ];
        let store = |prefix: &str, s: &ParamStore<f32>, recs: &mut Vec<Record>| {
            for (k, t) in s.iter() {
                recs.push(Record::f32(format!("{prefix}/{k}"), t.shape(), t.data().to_vec()));
            }
        };
        store("live", &self.params, &mut recs);
        store("ema", &self.ema.shadow, &mut recs);
        for (prefix, moments) in [("adam_m", &o.m), ("adam_v", &o.v)] {
            for (k, v) in moments {
                recs.push(Record::f32(format!("{prefix}/{k}"), &[v.len()], v.clone()));
            }
        }
        recs
    }

    pub fn from_records(recs: &[Record]) -> Result<Self> {
        let mut policy = PolicyConfig::new(Task::Wipe, Variant::Full);
        let mut train = TrainConfig::default();
        for (line, (k, v)) in parse_kv(find(recs, "meta/config")?.as_text()?)? {
            let known = policy.set(&k, &v).map_err(|msg| Error::Parse { line, msg })? || train.set(&k, &v).map_err(|msg| Error::Parse { line, msg })?;
            if !known {
                return Err(Error::Parse { line, msg: format!("unknown key {k:?}") });
            }
        }
        let mut env = EnvConfig::default();
        for (line, (k, v)) in parse_kv(find(recs, "meta/env")?.as_text()?)? {
            if !env.set(&k, &v).map_err(|msg| Error::Parse { line, msg })? {
                return Err(Error::Parse { line, msg: format!("unknown key {k:?}") });
            }
        }
        let demo: BTreeMap<String, String> = parse_kv(find(recs, "meta/demo")?.as_text()?)?.into_iter().map(|(_, kv)| kv).collect();
        let force = match (demo.get("force_mean"), demo.get("force_count")) {
            (Some(m), Some(c)) => Some(DemoForceStats {
                mean: m.parse().map_err(|_| Error::CorruptContainer("force_mean".into()))?,
                count: c.parse().map_err(|_| Error::CorruptContainer("force_count".into()))?,
            }),
            _ => None,
        };
        let nr = find(recs, "meta/norm")?;
        let (nd, nv) = (nr.dims.get(1).copied().unwrap_or(0), nr.as_f32()?);
        if nr.dims.len() != 2 || nr.dims[0] != 4 {
            return Err(Error::CorruptContainer("meta/norm must be [4, dim]".into()));
        }
        let part = |i: usize| nv[i * nd..(i + 1) * nd].to_vec();
        let norm = NormStats { action: MinMax { min: part(0), max: part(1) }, proprio: MinMax { min: part(2), max: part(3) } };
        let step = find(recs, "meta/adam_step")?.as_u32()?;
        let hyper = find(recs, "meta/adam")?.as_f32()?;
        let decay = find(recs, "meta/ema_decay")?.as_f32()?;
        if step.len() != 2 || hyper.len() != 5 || decay.len() != 1 {
            return Err(Error::CorruptContainer("optimizer state records".into()));
        }
        let mut params = ParamStore::new();
        let mut shadow = ParamStore::new();
        let (mut m, mut v) = (BTreeMap::new(), BTreeMap::new());
        for r in recs {
            let Some((prefix, name)) = r.name.split_once('/') else { continue };
            match prefix {
                "live" => params.insert(name, Tensor::new(&r.dims, r.as_f32()?.to_vec())?),
                "ema" => shadow.insert(name, Tensor::new(&r.dims, r.as_f32()?.to_vec())?),
                "adam_m" => drop(m.insert(name.to_string(), r.as_f32()?.to_vec())),
                "adam_v" => drop(v.insert(name.to_string(), r.as_f32()?.to_vec())),
                _ => {}
            }
        }
        for k in params.names() {
            for (label, present) in [("ema", shadow.contains(k)), ("adam_m", m.contains_key(k)), ("adam_v", v.contains_key(k))] {
                if !present {
                    return Err(Error::MissingRecord(format!("{label}/{k}")));
                }
            }
        }
        let opt = AdamWState {
            step: step[0] as u64 | (step[1] as u64) << 32,
            lr: hyper[0],
            beta1: hyper[1],
            beta2: hyper[2],
            eps: hyper[3],
            weight_decay: hyper[4],
            m,
            v,
        };
        Ok(Self { policy, train, env, norm, force, params, ema: EmaState { shadow, decay: decay[0] }, opt })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_container(path, &CHECKPOINT_MAGIC, &ckpt.to_records())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_records(&read_container(path, &CHECKPOINT_MAGIC)?)
}
