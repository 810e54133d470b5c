use gelfusion::fusion::{Fusion, Variant};
use gelfusion::numerics::{finite_diff_check, rng_for, Graph, Initializer, ParamStore, Tensor, Var};
use gelfusion::policy::{Denoiser, ObsBatch, PolicyConfig, PolicyModel};
use gelfusion::simenv::Task;
use gelfusion::tactile::TactileEncoder;
use gelfusion::vision::VisionEncoder;
use rand::Rng;

pub fn rand_tensor(seed: u64, name: &str, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let mut rng = rng_for(seed, name);
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}

/// Fill gradients with a random-target MSE loss on `forward`, then compare
/// against central differences.
fn check<F>(seed: u64, mut store: ParamStore<f64>, out_shape: &[usize], forward: F) -> f64
where
    F: Fn(&mut Graph<f64>, &ParamStore<f64>) -> Var,
{
    let target = rand_tensor(seed, "target", out_shape, -1.0, 1.0);
    let loss_of = |s: &ParamStore<f64>| {
        let mut g = Graph::new();
        let y = forward(&mut g, s);
        let t = g.input(target.clone());
        let l = g.mse(y, t).unwrap();
        (g, l)
    };
    let (mut g, l) = loss_of(&store);
    g.backward(l, &mut store).unwrap();
    let f = |s: &ParamStore<f64>| {
        let (g, l) = loss_of(s);
        g.data(l)[0]
    };
    let r = finite_diff_check(f, &store, 1e-5, 6, seed);
    assert!(r.checked > 0);
    r.max_rel_err
}

pub fn init(seed: u64, f: impl FnOnce(&mut Initializer)) -> ParamStore<f64> {
    let mut store = ParamStore::new();
    f(&mut Initializer::new(&mut store, seed));
    store.cast()
}

/// Worst relative error over `n` random instances.
pub fn vision_encoder(n: u64) -> f64 {
    let mut worst = 0.0f64;
    let enc = VisionEncoder::new(16, 2, 8).unwrap();
    for seed in 0..n {
        let store = init(seed, |i| enc.init(i));
        let x = rand_tensor(seed, "x", &[4, 1, 16, 16], 0.0, 1.0);
        worst = worst.max(check(seed, store, &[2, 8], |g, s| {
            let v = g.input(x.clone());
            enc.forward(g, s, v).unwrap()
        }));
    }
    worst
}

pub fn tactile_encoder(n: u64) -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..n {
        let h = 2 + (seed % 3) as usize;
        let enc = TactileEncoder::new(16, h, 8).unwrap();
        let store = init(seed, |i| enc.init(i));
        let l = rand_tensor(seed, "l", &[2 * h, 1, 16, 16], 0.0, 1.0);
        let r = rand_tensor(seed, "r", &[2 * h, 1, 16, 16], 0.0, 1.0);
        worst = worst.max(check(seed, store, &[2, 16], |g, s| {
            let (a, b) = (g.input(l.clone()), g.input(r.clone()));
            let (fl, fr) = enc.forward(g, s, a, b).unwrap();
            g.concat(&[fl, fr]).unwrap()
        }));
    }
    worst
}

pub fn fusion(variant: Variant, n: u64) -> f64 {
    let mut worst = 0.0f64;
    let d = 6;
    let fusion = Fusion::new(variant, d);
    for seed in 0..n {
        let mut store = init(seed, |i| fusion.init(i));
        for (k, name) in ["fv", "fl", "fr"].iter().enumerate() {
            store.insert(*name, rand_tensor(seed + 100 * k as u64, name, &[3, d], -2.0, 2.0));
        }
        worst = worst.max(check(seed, store, &[3, 2 * d], |g, s| {
            let fv = g.param(s, "fv").unwrap();
            let fl = g.param(s, "fl").unwrap();
            let fr = g.param(s, "fr").unwrap();
            fusion.forward(g, s, fv, fl, fr).unwrap().fused
        }));
    }
    worst
}

pub fn denoiser(n: u64) -> f64 {
    let mut worst = 0.0f64;
    let den = Denoiser::new(10, 12);
    for seed in 0..n {
        let store = init(seed, |i| den.init(i));
        let xt = rand_tensor(seed, "xt", &[3, 10], -2.0, 2.0);
        let te = rand_tensor(seed, "te", &[3, 32], -1.0, 1.0);
        let c = rand_tensor(seed, "c", &[3, 12], -1.0, 1.0);
        worst = worst.max(check(seed, store, &[3, 10], |g, s| {
            let (a, b, cc) = (g.input(xt.clone()), g.input(te.clone()), g.input(c.clone()));
            den.forward(g, s, a, b, cc).unwrap()
        }));
    }
    worst
}

pub fn policy_graph() -> f64 {
    let mut worst = 0.0f64;
    for seed in 0..4 {
        let variant = [Variant::Full, Variant::NoDynamic, Variant::Concat, Variant::SelfAttn][seed as usize];
        let mut cfg = PolicyConfig::new(Task::Wipe, variant);
        cfg.dim = 8;
        cfg.chunk = 2;
        cfg.exec_steps = 1;
        cfg.vision_size = 16;
        cfg.tactile_size = 16;
        let model = PolicyModel::new(cfg.clone()).unwrap();
        let store: ParamStore<f64> = model.init_params(seed).cast();
        let obs: ObsBatch<f64> = ObsBatch {
            b: 2,
            vision: rand_tensor(seed, "v", &[4, 1, 16, 16], 0.0, 1.0),
            tactile_l: Some(rand_tensor(seed, "l", &[4, 1, 16, 16], 0.0, 1.0)),
            tactile_r: Some(rand_tensor(seed, "r", &[4, 1, 16, 16], 0.0, 1.0)),
            fdyn: rand_tensor(seed, "d", &[2, cfg.dyn_len()], 0.0, 0.25),
            proprio: rand_tensor(seed, "p", &[2, cfg.proprio_len()], -1.0, 1.0),
        };
        let n = cfg.chunk_len();
        let xt = rand_tensor(seed, "xt", &[2, n], -2.0, 2.0);
        let te = rand_tensor(seed, "te", &[2, 32], -1.0, 1.0);
        worst = worst.max(check(seed, store, &[2, n], |g, s| {
            let (cond, _) = model.condition(g, s, &obs).unwrap();
            let (a, b) = (g.input(xt.clone()), g.input(te.clone()));
            model.predict_eps(g, s, a, b, cond).unwrap()
        }));
    }
    worst
}
