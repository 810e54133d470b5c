//! Visual feature `F_v` from a short window of top-down frames.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::numerics::{Graph, Initializer, ParamStore, Real, Var};
use crate::tactile::ConvEncoder;

/// Crop side as a fraction of the frame.
pub const CROP_FRACTION: f64 = 0.9;
/// Half-range of the global brightness jitter.
pub const BRIGHTNESS_JITTER: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct VisionEncoder {
    pub enc: ConvEncoder,
}

impl VisionEncoder {
    pub const CHANNELS: [usize; 3] = [8, 16, 32];

    pub fn new(vision_size: usize, frames: usize, dim: usize) -> Result<Self> {
        Ok(Self { enc: ConvEncoder::new("vis", &Self::CHANNELS, vision_size, frames, dim)? })
    }

    pub fn init(&self, init: &mut Initializer) {
        self.enc.init(init);
    }

    /// `[B·T_o,1,V,V]` → `[B,D]`.
    pub fn forward<T: Real>(&self, g: &mut Graph<T>, store: &ParamStore<T>, x: Var) -> Result<Var> {
        self.enc.forward(g, store, x)
    }
}

/// Random crop to `0.9·V` (same window for every frame), bilinear resize back
/// to `V×V`, then one brightness offset in `±0.05` for the whole window.
pub fn augment_window(frames: &[Vec<f32>], size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f32>> {
    let crop = ((size as f64 * CROP_FRACTION).round() as usize).clamp(1, size);
    let ox = rng.gen_range(0..=size - crop);
    let oy = rng.gen_range(0..=size - crop);
    let shift = rng.gen_range(-BRIGHTNESS_JITTER..=BRIGHTNESS_JITTER) as f32;
    let scale = crop as f64 / size as f64;
    let sample = |f: &[f32], i: usize, j: usize| -> f32 {
        let v = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (crop - 1) as f64);
        let u = ((j as f64 + 0.5) * scale - 0.5).clamp(0.0, (crop - 1) as f64);
        let (v0, u0) = (v.floor() as usize, u.floor() as usize);
        let (v1, u1) = ((v0 + 1).min(crop - 1), (u0 + 1).min(crop - 1));
        let (fv, fu) = ((v - v0 as f64) as f32, (u - u0 as f64) as f32);
        let px = |r: usize, c: usize| f[(oy + r) * size + ox + c];
        let top = px(v0, u0) * (1.0 - fu) + px(v0, u1) * fu;
        let bot = px(v1, u0) * (1.0 - fu) + px(v1, u1) * fu;
        top * (1.0 - fv) + bot * fv
    };
    frames
        .iter()
        .map(|f| {
            let mut out = Vec::with_capacity(size * size);
            for i in 0..size {
                for j in 0..size {
                    out.push((sample(f, i, j) + shift).clamp(0.0, 1.0));
                }
            }
            out
        })
        .collect()
}
