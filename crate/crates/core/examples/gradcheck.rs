//! Finite-difference check of the vision encoder's analytic gradients.

use gelfusion::numerics::{finite_diff_check, rng_for, Graph, Initializer, ParamStore, Tensor};
use gelfusion::vision::VisionEncoder;
use rand::Rng;

fn main() -> gelfusion::Result<()> {
    let enc = VisionEncoder::new(16, 2, 8)?;
    let mut store32 = ParamStore::new();
    enc.init(&mut Initializer::new(&mut store32, 0));
    let mut store: ParamStore<f64> = store32.cast();
    let mut rng = rng_for(0, "example");
    let x = Tensor::new(&[4, 1, 16, 16], (0..4 * 256).map(|_| rng.gen_range(0.0..1.0)).collect())?;
    let target = Tensor::new(&[2, 8], (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let loss = |s: &ParamStore<f64>, g: &mut Graph<f64>| {
        let xv = g.input(x.clone());
        let out = enc.forward(g, s, xv).unwrap();
        let t = g.input(target.clone());
        g.mse(out, t).unwrap()
    };
    let mut g = Graph::new();
    let l = loss(&store, &mut g);
    g.backward(l, &mut store)?;
    let report = finite_diff_check(
        |s| {
            let mut g = Graph::new();
            let l = loss(s, &mut g);
            g.data(l)[0]
        },
        &store,
        1e-5,
        8,
        0,
    );
    println!("checked {} coordinates, max relative error {:.2e}", report.checked, report.max_rel_err);
    if let Some((name, i, a, n)) = report.worst {
        println!("worst: {name}[{i}] analytic {a:.6e} numeric {n:.6e}");
    }
    Ok(())
}
