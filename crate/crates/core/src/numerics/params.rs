use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::real::Real;
use super::tensor::Tensor;

/// Named parameters in deterministic (lexicographic) order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore<T = f32> {
    params: BTreeMap<String, Tensor<T>>,
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self { params: BTreeMap::new() }
    }

    /// Insert or replace a parameter.
    pub fn insert(&mut self, name: impl Into<String>, t: Tensor<T>) {
        self.params.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.params.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<T>)> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor<T>)> {
        self.params.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn num_elements(&self) -> usize {
        self.params.values().map(|t| t.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params.values_mut().for_each(|t| t.zero_grad());
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore { params: self.params.iter().map(|(k, v)| (k.clone(), v.cast())).collect() }
    }

    /// Copy of the values without gradient buffers.
    pub fn detached(&self) -> Self {
        let mut out = self.clone();
        out.params.values_mut().for_each(|t| t.grad = None);
        out
    }

    pub fn same_keys(&self, other: &ParamStore<T>) -> bool {
        self.params.len() == other.params.len() && self.params.keys().zip(other.params.keys()).all(|(a, b)| a == b)
    }
}

/// Stable 64-bit seed for a named stream under a run seed (FNV-1a + splitmix finalizer).
pub fn derive_seed(run_seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ run_seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

pub fn rng_for(run_seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(run_seed, name))
}

/// Kaiming-uniform tensor, `U(±gain·√(6/fan_in))`, seeded from `(run_seed, name)`.
pub fn kaiming_uniform(run_seed: u64, name: &str, shape: &[usize], fan_in: usize, gain: f64) -> Tensor<f32> {
    let bound = gain * (6.0 / fan_in.max(1) as f64).sqrt();
    let mut rng = rng_for(run_seed, name);
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..bound) as f32).collect();
    Tensor::new(shape, data).expect("init shape")
}

/// Builder that fills a store with named, individually seeded initial values.
pub struct Initializer<'a> {
    pub store: &'a mut ParamStore<f32>,
    pub seed: u64,
}

impl<'a> Initializer<'a> {
    pub fn new(store: &'a mut ParamStore<f32>, seed: u64) -> Self {
        Self { store, seed }
    }

    /// Linear layer `prefix.w[in,out]`, `prefix.b[out]` (zero bias).
    pub fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize, gain: f64) {
        let w = format!("{prefix}.w");
        self.store.insert(w.clone(), kaiming_uniform(self.seed, &w, &[fan_in, fan_out], fan_in, gain));
        self.store.insert(format!("{prefix}.b"), Tensor::zeros(&[fan_out]));
    }

    /// Conv layer `prefix.k[out,in,k,k]`, `prefix.b[out]`.
    pub fn conv(&mut self, prefix: &str, in_ch: usize, out_ch: usize, k: usize) {
        let name = format!("{prefix}.k");
        let fan_in = in_ch * k * k;
        self.store.insert(name.clone(), kaiming_uniform(self.seed, &name, &[out_ch, in_ch, k, k], fan_in, 1.0));
        self.store.insert(format!("{prefix}.b"), Tensor::zeros(&[out_ch]));
    }

    /// Attention-pool scorer `prefix.w[C]`, `prefix.b[1]`.
    pub fn scorer(&mut self, prefix: &str, channels: usize) {
        let name = format!("{prefix}.w");
        self.store.insert(name.clone(), kaiming_uniform(self.seed, &name, &[channels], channels, 0.5));
        self.store.insert(format!("{prefix}.b"), Tensor::zeros(&[1]));
    }

    pub fn layer_norm(&mut self, prefix: &str, dim: usize) {
        self.store.insert(format!("{prefix}.g"), Tensor::full(&[dim], 1.0));
        self.store.insert(format!("{prefix}.b"), Tensor::zeros(&[dim]));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_reproducible_and_name_dependent() {
        let a = kaiming_uniform(7, "enc.w", &[4, 4], 4, 1.0);
        let b = kaiming_uniform(7, "enc.w", &[4, 4], 4, 1.0);
        let c = kaiming_uniform(7, "dec.w", &[4, 4], 4, 1.0);
        let d = kaiming_uniform(8, "enc.w", &[4, 4], 4, 1.0);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        let bound = (6.0f32 / 4.0).sqrt();
        assert!(a.data().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn iteration_order_is_lexicographic() {
        let mut s = ParamStore::<f32>::new();
        s.insert("z", Tensor::zeros(&[1]));
        s.insert("a", Tensor::zeros(&[1]));
        s.insert("m", Tensor::zeros(&[1]));
        let names: Vec<_> = s.names().cloned().collect();
        assert_eq!(names, ["a", "m", "z"]);
    }
}
