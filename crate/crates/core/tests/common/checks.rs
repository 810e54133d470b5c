use gelfusion::fusion::{Fusion, Variant};
use gelfusion::numerics::{rng_for, AdamWState, Graph, Initializer, ParamStore, Tensor};
use gelfusion::policy::rot6d::{det3, matrix_to_rot6d, quat_to_matrix, rot6d_to_matrix};
use gelfusion::policy::schedule::normal_vec;
use gelfusion::policy::{ddpm_sample, timestep_embedding, Denoiser, DiffusionSchedule};
use gelfusion::simenv::{run_expert_episode, EnvConfig, Task};
use gelfusion::tactile::{
    contact_events, dynamic_feature_window, dynamic_stats, merged_series, residual_binarize, EventKind, EventParams,
};
use rand::Rng;
use rand_distr::StandardNormal;

pub type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `(fused, weights)` of the cross-attention fusion for one sample.
fn fuse(store: &ParamStore<f64>, d: usize, f: [&[f64]; 3]) -> (Vec<f64>, Vec<f64>) {
    let fusion = Fusion::new(Variant::Full, d);
    let mut g = Graph::<f64>::new();
    let v: Vec<_> = f.iter().map(|x| g.input(Tensor::new(&[1, d], x.to_vec()).unwrap())).collect();
    let out = fusion.forward(&mut g, store, v[0], v[1], v[2]).unwrap();
    (g.data(out.fused).to_vec(), g.data(out.weights.unwrap()).to_vec())
}

/// Simplex, key-shift invariance, identical-feature uniformity and saturation.
pub fn fusion_algebra(trials: u64) -> Check {
    let mut worst_uniform = 0.0f64;
    let mut worst_sat = 0.0f64;
    for trial in 0..trials {
        let mut rng = rng_for(trial, "fusion-algebra");
        let d = rng.gen_range(2..=16);
        let mut store32 = ParamStore::new();
        Fusion::new(Variant::Full, d).init(&mut Initializer::new(&mut store32, trial));
        let store: ParamStore<f64> = store32.cast();
        let mut feat = || (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect::<Vec<f64>>();
        let (fv, fl, fr) = (feat(), feat(), feat());

        let (_, w) = fuse(&store, d, [&fv, &fl, &fr]);
        let sum: f64 = w.iter().sum();
        ensure(w.iter().all(|x| *x >= 0.0) && (sum - 1.0).abs() < 1e-12, || format!("trial {trial}: weights {w:?} off the simplex"))?;

        let mut shifted = store.clone();
        let delta = feat();
        for (b, dv) in shifted.get_mut("fuse.k.b").unwrap().data_mut().iter_mut().zip(&delta) {
            *b += dv;
        }
        let (_, w2) = fuse(&shifted, d, [&fv, &fl, &fr]);
        let shift = w.iter().zip(&w2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(shift < 1e-9, || format!("trial {trial}: common key shift moved weights by {shift}"))?;

        let (fused, wu) = fuse(&store, d, [&fv, &fv, &fv]);
        let e = wu.iter().map(|x| (x - 1.0 / 3.0).abs()).chain(fused[d..].iter().zip(&fv).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
        worst_uniform = worst_uniform.max(e);
        ensure(e < 1e-6, || format!("trial {trial}: identical features deviate by {e}"))?;

        let mut sat = store.clone();
        let alpha = 100.0 * (d as f64).sqrt();
        sat.get_mut("fuse.q.w").unwrap().data_mut().fill(0.0);
        let qb = sat.get_mut("fuse.q.b").unwrap().data_mut();
        qb.fill(0.0);
        qb[0] = alpha;
        let kw = sat.get_mut("fuse.k.w").unwrap().data_mut();
        kw.fill(0.0);
        (0..d).for_each(|i| kw[i * d + i] = 1.0);
        sat.get_mut("fuse.k.b").unwrap().data_mut().fill(0.0);
        let mut v = fv.clone();
        v[0] = 1.0;
        let (mut l, mut r) = (fl.clone(), fr.clone());
        l[0] = 0.0;
        r[0] = 0.0;
        let (fused, _) = fuse(&sat, d, [&v, &l, &r]);
        let dist = fused[d..].iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        worst_sat = worst_sat.max(dist);
        ensure(dist < 1e-6, || format!("trial {trial}: saturated attention off F_v by {dist}"))?;
    }
    Ok(format!("{trials} trials, uniformity err {worst_uniform:.1e}, saturation err {worst_sat:.1e}"))
}

/// `σ² = μ(1−μ)` exactly, static windows give zero, a half-changed frame gives (0.5, 0.25).
pub fn dynamic_closed_forms(trials: u64) -> Check {
    for trial in 0..trials {
        let mut rng = rng_for(trial, "dyn");
        let n = rng.gen_range(1..=256);
        let p: f64 = rng.gen();
        let img: Vec<f32> = (0..n).map(|_| if rng.gen::<f64>() < p { 1.0 } else { 0.0 }).collect();
        let st = dynamic_stats(&img).map_err(|e| e.to_string())?;
        ensure(st.var == st.mean * (1.0 - st.mean), || format!("trial {trial}: var {} mean {}", st.var, st.mean))?;
        let m = img.iter().map(|v| *v as f64).sum::<f64>() / n as f64;
        let two_pass = img.iter().map(|v| (*v as f64 - m).powi(2)).sum::<f64>() / n as f64;
        ensure((two_pass - st.var).abs() < 1e-12, || format!("trial {trial}: two-pass variance {two_pass} vs {}", st.var))?;

        let h = rng.gen_range(2..=4);
        let frame: Vec<f32> = (0..64).map(|_| rng.gen()).collect();
        let window = vec![frame.clone(); h];
        let f = dynamic_feature_window(&[&window[..], &window[..]], 0.05).map_err(|e| e.to_string())?;
        ensure(f.len() == 4 * (h - 1) && f.iter().all(|v| *v == 0.0), || format!("trial {trial}: static window gave {f:?}"))?;
    }
    let prev = vec![0.1f32; 64];
    let cur: Vec<f32> = (0..64).map(|i| if i % 2 == 0 { 0.3 } else { 0.1 }).collect();
    let st = dynamic_stats(&residual_binarize(&cur, &prev, 0.05).unwrap()).unwrap();
    ensure(st.mean == 0.5 && st.var == 0.25, || format!("half-changed frame gave ({}, {})", st.mean, st.var))?;
    Ok(format!("{trials} random binary images and windows, half-changed frame (0.5, 0.25)"))
}

/// Detected initiation within ±2 steps of the first positive-pressure step.
pub fn contact_event_lag(episodes: u64) -> Check {
    let cfg = EnvConfig::default();
    let mut worst = 0i64;
    for seed in 0..episodes {
        let t = run_expert_episode(Task::Wipe, &cfg, seed, None).map_err(|e| e.to_string())?;
        let l: Vec<&[f32]> = t.observations.iter().map(|o| &o.tactile_l[..]).collect();
        let r: Vec<&[f32]> = t.observations.iter().map(|o| &o.tactile_r[..]).collect();
        let ev = contact_events(&merged_series(&l, &r, cfg.tau).unwrap(), &EventParams::default());
        let first = t.first_contact_step().ok_or(format!("seed {seed}: expert never touched the board"))? as i64;
        let init = ev.iter().find(|e| e.kind == EventKind::Initiation).ok_or(format!("seed {seed}: no initiation detected"))?.step as i64;
        worst = worst.max((init - first).abs());
        ensure((init - first).abs() <= 2, || format!("seed {seed}: initiation at {init}, first contact at {first}"))?;
    }
    Ok(format!("{episodes} episodes, worst lag {worst} steps"))
}

/// Monte Carlo moments of `q_sample` against the closed form.
pub fn q_sample_moments(draws: usize) -> Check {
    let s = DiffusionSchedule::scaled(50).unwrap();
    let sigma0 = 0.7f64;
    let mut worst = 0.0f64;
    for t in [1, 10, 25, 50] {
        let mut rng = rng_for(t as u64, "q-moments");
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..draws {
            let x0 = (sigma0 * rng.sample::<f64, _>(StandardNormal)) as f32;
            let eps = normal_vec(&mut rng, 1);
            let x = s.q_sample(&[x0], t, &eps).unwrap()[0] as f64;
            sum += x;
            sq += x * x;
        }
        let mean = sum / draws as f64;
        let var = sq / draws as f64 - mean * mean;
        let ab = s.alpha_bar_at(t).unwrap();
        let want = ab * sigma0 * sigma0 + 1.0 - ab;
        let rel = (var - want).abs() / want;
        worst = worst.max(rel);
        ensure(rel < 0.05, || format!("t={t}: variance {var:.4} vs {want:.4}"))?;
        ensure(mean.abs() < 0.05 * want.sqrt(), || format!("t={t}: mean {mean:.4}"))?;
    }
    Ok(format!("{draws} draws per step, worst variance error {:.2}%", 100.0 * worst))
}

/// Train the denoiser on one (chunk, condition) pair, then sample it back.
/// Returns `(steps used, per-coordinate sampling MSE)`.
pub fn overfit_single(max_steps: usize, seed: u64) -> Result<(usize, f64), String> {
    let (n, c) = (80, 24);
    let mut rng = rng_for(seed, "overfit");
    let chunk: Vec<f32> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let cond: Vec<f32> = (0..c).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let den = Denoiser::new(n, c);
    let sched = DiffusionSchedule::scaled(50).unwrap();
    let mut params = ParamStore::new();
    den.init(&mut Initializer::new(&mut params, seed));
    let mut opt = AdamWState::new(&params, 1e-3);
    let batch = 64;
    let sample_mse = |params: &ParamStore<f32>| -> f64 {
        let mut total = 0.0;
        for k in 0..8 {
            let mut srng = rng_for(seed, &format!("sample/{k}"));
            let x = ddpm_sample(&sched, n, &mut srng, |x, t| {
                let mut g = Graph::new();
                let xt = g.input(Tensor::new(&[1, n], x.to_vec())?);
                let te = g.input(Tensor::new(&[1, 32], timestep_embedding(t, 32))?);
                let cv = g.input(Tensor::new(&[1, c], cond.clone())?);
                let e = den.forward(&mut g, params, xt, te, cv)?;
                Ok(g.data(e).to_vec())
            })
            .unwrap();
            total += x.iter().zip(&chunk).map(|(a, b)| ((a - b) as f64).powi(2)).sum::<f64>() / n as f64;
        }
        total / 8.0
    };
    for step in 0..max_steps {
        let mut xt = Vec::with_capacity(batch * n);
        let mut te = Vec::with_capacity(batch * 32);
        let mut eps = Vec::with_capacity(batch * n);
        for _ in 0..batch {
            let t = rng.gen_range(1..=sched.steps());
            let e = normal_vec(&mut rng, n);
            xt.extend(sched.q_sample(&chunk, t, &e).unwrap());
            te.extend(timestep_embedding(t, 32));
            eps.extend(e);
        }
        let mut g = Graph::new();
        let a = g.input(Tensor::new(&[batch, n], xt).unwrap());
        let b = g.input(Tensor::new(&[batch, 32], te).unwrap());
        let cv = g.input(Tensor::new(&[batch, c], cond.repeat(batch)).unwrap());
        let pred = den.forward(&mut g, &params, a, b, cv).unwrap();
        let target = g.input(Tensor::new(&[batch, n], eps).unwrap());
        let loss = g.mse(pred, target).unwrap();
        g.backward(loss, &mut params).unwrap();
        opt.apply(&mut params).unwrap();
        if (step + 1) % 250 == 0 {
            let mse = sample_mse(&params);
            if mse < 0.05 {
                return Ok((step + 1, mse));
            }
        }
    }
    Err(format!("sampling MSE {:.4} after {max_steps} steps", sample_mse(&params)))
}

/// Random rotations through 6D and back; decoded matrices are proper rotations.
pub fn rotation_round_trips(trials: u64) -> Check {
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let mut rng = rng_for(trial, "rot");
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let m = quat_to_matrix(q);
        let r = matrix_to_rot6d(&m).map_err(|e| e.to_string())?;
        let back = rot6d_to_matrix(&r).map_err(|e| e.to_string())?;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((m[i][j] - back[i][j]).abs());
            }
        }
        let noisy: [f64; 6] = std::array::from_fn(|i| r[i] + 0.3 * rng.sample::<f64, _>(StandardNormal));
        if let Ok(d) = rot6d_to_matrix(&noisy) {
            for i in 0..3 {
                for j in 0..3 {
                    let dot: f64 = (0..3).map(|k| d[k][i] * d[k][j]).sum();
                    worst = worst.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
                }
            }
            worst = worst.max((det3(&d) - 1.0).abs());
        }
        ensure(worst < 1e-5, || format!("trial {trial}: error {worst}"))?;
    }
    Ok(format!("{trials} round trips, worst error {worst:.1e}"))
}
