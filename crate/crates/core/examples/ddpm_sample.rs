//! Forward noising moments and reverse sampling with an exact noise oracle.

use gelfusion::numerics::rng_for;
use gelfusion::policy::schedule::normal_vec;
use gelfusion::policy::{ddpm_sample, DiffusionSchedule};

fn main() -> gelfusion::Result<()> {
    let sched = DiffusionSchedule::scaled(50)?;
    let x0 = [0.8f32, -0.4, 0.1];
    for t in [1, 10, 25, 50] {
        let ab = sched.alpha_bar_at(t)?;
        let mut rng = rng_for(t as u64, "q");
        let draws: Vec<f32> = (0..10_000).map(|_| sched.q_sample(&x0[..1], t, &normal_vec(&mut rng, 1)).unwrap()[0]).collect();
        let mean = draws.iter().map(|v| *v as f64).sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|v| (*v as f64 - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        println!("t={t:>2}: mean {mean:.4} (exact {:.4}), var {var:.4} (exact {:.4})", ab.sqrt() * x0[0] as f64, 1.0 - ab);
    }
    // For a point mass the optimal noise prediction is known in closed form.
    let mut rng = rng_for(0, "sample");
    let x = ddpm_sample(&sched, x0.len(), &mut rng, |x, t| {
        let ab = sched.alpha_bar_at(t)? as f32;
        Ok(x.iter().zip(&x0).map(|(xt, x0)| (xt - ab.sqrt() * x0) / (1.0 - ab).sqrt()).collect())
    })?;
    println!("target {x0:?}, sampled {x:?}");
    Ok(())
}
