//! Cross-attention fusion weights over vision and the two tactile tokens.

use gelfusion::fusion::{Fusion, Variant};
use gelfusion::numerics::{Graph, Initializer, ParamStore, Tensor};

fn weights(store: &ParamStore<f32>, fusion: &Fusion, f: [Vec<f32>; 3]) -> gelfusion::Result<Vec<f32>> {
    let d = fusion.dim;
    let mut g = Graph::new();
    let v: Vec<_> = f.into_iter().map(|x| Tensor::new(&[1, d], x).map(|t| g.input(t))).collect::<Result<_, _>>()?;
    let out = fusion.forward(&mut g, store, v[0], v[1], v[2])?;
    Ok(g.data(out.weights.expect("cross attention")).to_vec())
}

fn main() -> gelfusion::Result<()> {
    let d = 8;
    let fusion = Fusion::new(Variant::Full, d);
    let mut store = ParamStore::new();
    fusion.init(&mut Initializer::new(&mut store, 0));
    let same = vec![0.3; d];
    println!("identical features: {:?}", weights(&store, &fusion, [same.clone(), same.clone(), same])?);
    let vision: Vec<f32> = (0..d).map(|i| (i as f32 * 0.7).sin()).collect();
    let left: Vec<f32> = (0..d).map(|i| (i as f32 * 1.3).cos()).collect();
    let right = vec![0.0; d];
    println!("distinct features: {:?}", weights(&store, &fusion, [vision, left, right])?);
    Ok(())
}
