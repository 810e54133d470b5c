use crate::error::{Error, Result};
use crate::numerics::ops::ConvGeometry;
use crate::numerics::{Graph, Initializer, ParamStore, Real, Var};

const KERNEL: usize = 4;
const STRIDE: usize = 2;
const PAD: usize = 1;
const COORD_CHANNELS: usize = 2;

/// `[2, s, s]` maps of column and row position in `[-1, 1]`.
fn coord_maps<T: Real>(s: usize) -> Vec<T> {
    let at = |i: usize| if s > 1 { T::from_f64(2.0 * i as f64 / (s - 1) as f64 - 1.0) } else { T::zero() };
    let cols = (0..s * s).map(|k| at(k % s));
    let rows = (0..s * s).map(|k| at(k / s));
    cols.chain(rows).collect()
}

/// Strided conv tower with SiLU, spatial attention pooling per frame, and a
/// linear projection of the concatenated per-frame vectors. Two coordinate
/// channels are appended before pooling so the pooled vector also carries the
/// expected position of the attended region.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvEncoder {
    pub prefix: String,
    pub channels: Vec<usize>,
    pub input_size: usize,
    pub frames: usize,
    pub dim: usize,
}

impl ConvEncoder {
    pub fn new(prefix: &str, channels: &[usize], input_size: usize, frames: usize, dim: usize) -> Result<Self> {
        if channels.is_empty() || frames == 0 || dim == 0 {
            return Err(Error::Config(format!("{prefix}: empty encoder")));
        }
        let mut shape = [1, 1, input_size, input_size];
        for (i, &c) in channels.iter().enumerate() {
            let geom = ConvGeometry::new(&shape, &[c, shape[1], KERNEL, KERNEL], STRIDE, PAD)
                .map_err(|e| Error::Config(format!("{prefix} block {i}: {e}")))?;
            shape = geom.out_shape();
        }
        Ok(Self { prefix: prefix.to_string(), channels: channels.to_vec(), input_size, frames, dim })
    }

    pub fn pooled_dim(&self) -> usize {
        *self.channels.last().unwrap() + COORD_CHANNELS
    }

    pub fn init(&self, init: &mut Initializer) {
        let mut cin = 1;
        for (i, &c) in self.channels.iter().enumerate() {
            init.conv(&format!("{}.conv{i}", self.prefix), cin, c, KERNEL);
            cin = c;
        }
        init.scorer(&format!("{}.pool", self.prefix), cin);
        init.linear(&format!("{}.proj", self.prefix), self.pooled_dim() * self.frames, self.dim, 1.0);
    }

    /// `[N,1,S,S]` frames → `[N,C]` pooled vectors.
    pub fn frame_features<T: Real>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let mut h = x;
        for i in 0..self.channels.len() {
            let k = g.param(store, &format!("{}.conv{i}.k", self.prefix))?;
            let b = g.param(store, &format!("{}.conv{i}.b", self.prefix))?;
            let c = g.conv2d(h, k, b, STRIDE, PAD)?;
            h = g.silu(c);
        }
        let [n, c, hh, ww] = [0, 1, 2, 3].map(|i| g.shape(h)[i]);
        let flat = g.reshape(h, &[n, c * hh * ww])?;
        let coords = g.constant(&[n, COORD_CHANNELS * hh * ww], coord_maps::<T>(hh).repeat(n))?;
        let joined = g.concat(&[flat, coords])?;
        let h = g.reshape(joined, &[n, c + COORD_CHANNELS, hh, ww])?;
        // Scores depend on content only; the coordinate channels are just pooled.
        let w = g.param(store, &format!("{}.pool.w", self.prefix))?;
        let w0 = g.zeros(&[COORD_CHANNELS]);
        let w = g.concat(&[w, w0])?;
        let b = g.param(store, &format!("{}.pool.b", self.prefix))?;
        g.attention_pool(h, w, b)
    }

    /// `[B·frames,1,S,S]` (sample-major, time-minor) → `[B,D]`.
    pub fn forward<T: Real>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        let n = g.shape(x)[0];
        if n % self.frames != 0 || g.shape(x)[2] != self.input_size || g.shape(x)[3] != self.input_size {
            return Err(crate::error::shape_err(
                "encoder input",
                g.shape(x),
                &[self.frames, 1, self.input_size, self.input_size],
            ));
        }
        let pooled = self.frame_features(g, store, x)?;
        let flat = g.reshape(pooled, &[n / self.frames, self.frames * self.pooled_dim()])?;
        let w = g.param(store, &format!("{}.proj.w", self.prefix))?;
        let b = g.param(store, &format!("{}.proj.b", self.prefix))?;
        g.linear(flat, w, b)
    }
}

/// Left and right geometric encoders with separate parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TactileEncoder {
    pub left: ConvEncoder,
    pub right: ConvEncoder,
}

impl TactileEncoder {
    pub const CHANNELS: [usize; 3] = [16, 32, 64];

    pub fn new(tactile_size: usize, horizon: usize, dim: usize) -> Result<Self> {
        if !(2..=4).contains(&horizon) {
            return Err(Error::Config(format!("tactile horizon {horizon} outside 2..=4")));
        }
        Ok(Self {
            left: ConvEncoder::new("tac_l", &Self::CHANNELS, tactile_size, horizon, dim)?,
            right: ConvEncoder::new("tac_r", &Self::CHANNELS, tactile_size, horizon, dim)?,
        })
    }

    pub fn init(&self, init: &mut Initializer) {
        self.left.init(init);
        self.right.init(init);
    }

    /// `(F_T^l, F_T^r)`, each `[B,D]`.
    pub fn forward<T: Real>(&self, g: &mut Graph<T>, store: &ParamStore<T>, left: Var, right: Var) -> Result<(Var, Var)> {
        Ok((self.left.forward(g, store, left)?, self.right.forward(g, store, right)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(enc: &TactileEncoder) -> ParamStore<f32> {
        let mut store = ParamStore::new();
        enc.init(&mut Initializer::new(&mut store, 3));
        store
    }

    #[test]
    fn identical_frames_give_identical_vectors() {
        let enc = TactileEncoder::new(32, 2, 64).unwrap();
        let store = params(&enc);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let frame: Vec<f32> = (0..1024).map(|_| rng.gen()).collect();
        let data = [frame.clone(), frame].concat();
        let mut g = Graph::new();
        let x = g.input(Tensor::new(&[2, 1, 32, 32], data).unwrap());
        let v = enc.left.frame_features(&mut g, &store, x).unwrap();
        let d = g.data(v);
        let n = enc.left.pooled_dim();
        assert_eq!(&d[..n], &d[n..]);
    }

    #[test]
    fn zero_input_zero_feature() {
        let enc = TactileEncoder::new(32, 2, 64).unwrap();
        let store = params(&enc);
        let mut g = Graph::new();
        let x = g.input(Tensor::zeros(&[2, 1, 32, 32]));
        let f = enc.left.forward(&mut g, &store, x).unwrap();
        assert_eq!(g.shape(f), &[1, 64]);
        assert!(g.data(f).iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn output_dim_for_every_horizon() {
        for h in 2..=4 {
            let enc = TactileEncoder::new(32, h, 64).unwrap();
            let store = params(&enc);
            let mut g = Graph::new();
            let l = g.input(Tensor::full(&[3 * h, 1, 32, 32], 0.2));
            let r = g.input(Tensor::full(&[3 * h, 1, 32, 32], 0.4));
            let (fl, fr) = enc.forward(&mut g, &store, l, r).unwrap();
            assert_eq!(g.shape(fl), &[3, 64]);
            assert_eq!(g.shape(fr), &[3, 64]);
        }
        assert!(TactileEncoder::new(32, 5, 64).is_err());
        assert!(TactileEncoder::new(30, 2, 64).is_err());
    }

    #[test]
    fn sides_have_separate_parameters() {
        let enc = TactileEncoder::new(32, 2, 64).unwrap();
        let store = params(&enc);
        assert_ne!(store.get("tac_l.conv0.k").unwrap(), store.get("tac_r.conv0.k").unwrap());
    }
}
