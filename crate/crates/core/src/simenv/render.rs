use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::EnvConfig;
use super::gaussian;
use crate::numerics::derive_seed;

const VISION_BACKGROUND: f32 = 0.9;
const INK_CONTRAST: f32 = 0.7;
const MARKER_LEVEL: f32 = 0.5;
const CHIP_LEVEL: f32 = 0.35;
const JAW_LEVEL: f32 = 0.1;
const SPECKLE_SEED: u64 = 0x6765_6c73;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn tag(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// Seed of the pixel-noise stream for one rendered channel.
pub(crate) fn noise_seed(episode_seed: u64, step: usize, channel: &str) -> u64 {
    derive_seed(episode_seed, &format!("noise/{step}/{channel}"))
}

fn add_noise_and_clip(frame: &mut [f32], sigma: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in frame.iter_mut() {
        *v = (*v + gaussian(&mut rng, sigma)).clamp(0.0, 1.0);
    }
}

fn pixel_centre(i: usize, j: usize, n: usize) -> (f64, f64) {
    ((j as f64 + 0.5) / n as f64, (i as f64 + 0.5) / n as f64)
}

/// Top-down board view: dark ink on a light board plus an opaque eraser marker.
/// Depends only on the ink raster, the eraser's `(x, y)` and the noise seed.
pub fn render_vision_wipe(cfg: &EnvConfig, ink: &[f32], x: f64, y: f64, seed: u64) -> Vec<f32> {
    let (v, g) = (cfg.vision_size, cfg.grid_size);
    let r2 = cfg.eraser_radius * cfg.eraser_radius;
    let mut out = vec![0.0f32; v * v];
    for i in 0..v {
        for j in 0..v {
            let (u, w) = pixel_centre(i, j, v);
            let (dx, dy) = (u - x, w - y);
            out[i * v + j] = if dx * dx + dy * dy <= r2 {
                MARKER_LEVEL
            } else {
                let gi = ((w * g as f64) as usize).min(g - 1);
                let gj = ((u * g as f64) as usize).min(g - 1);
                VISION_BACKGROUND - INK_CONTRAST * ink[gi * g + gj]
            };
        }
    }
    add_noise_and_clip(&mut out, cfg.sigma_vision, seed);
    out
}

/// Top-down pick view: the chip as a rectangle whose width scales with its true
/// width, and the two gripper jaws at the commanded aperture.
pub fn render_vision_pick(cfg: &EnvConfig, chip: (f64, f64, f64), x: f64, y: f64, g: f64, seed: u64) -> Vec<f32> {
    let v = cfg.vision_size;
    let (cx, cy, w) = chip;
    let jaw_half_len = 0.06;
    let jaw_half_width = 0.012;
    let mut out = vec![VISION_BACKGROUND; v * v];
    for i in 0..v {
        for j in 0..v {
            let (u, q) = pixel_centre(i, j, v);
            let px = &mut out[i * v + j];
            if (u - cx).abs() <= w / 4.0 && (q - cy).abs() <= 0.04 {
                *px = CHIP_LEVEL;
            }
            let on_jaw = |jx: f64| (u - jx).abs() <= jaw_half_width && (q - y).abs() <= jaw_half_len;
            if on_jaw(x - g / 4.0) || on_jaw(x + g / 4.0) {
                *px = JAW_LEVEL;
            }
        }
    }
    add_noise_and_clip(&mut out, cfg.sigma_vision, seed);
    out
}

/// Fixed per-sensor gel texture in `[-speckle, speckle]`.
pub(crate) fn speckle(cfg: &EnvConfig, side: Side) -> Vec<f32> {
    let s = cfg.tactile_size;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SPECKLE_SEED, side.tag()));
    (0..s * s).map(|_| rng.gen_range(-cfg.tactile_speckle..=cfg.tactile_speckle) as f32).collect()
}

/// Gel image for one sensor: background, fixed speckle, a contact disk of radius
/// `r₀·√(p/p_ref)` and amplitude `a₀·min(1, p/p_ref)` shifted by `offset_px`, and noise.
pub fn render_tactile(cfg: &EnvConfig, p_side: f64, offset_px: (f64, f64), side: Side, seed: u64) -> Vec<f32> {
    let s = cfg.tactile_size;
    let mut out: Vec<f32> = speckle(cfg, side).into_iter().map(|sp| cfg.tactile_background as f32 + sp).collect();
    if p_side > 0.0 {
        let ratio = p_side / cfg.p_ref;
        let r = cfg.disk_radius * ratio.sqrt();
        let a = (cfg.disk_amplitude * ratio.min(1.0)) as f32;
        let c = s as f64 / 2.0;
        let (ox, oy) = (c + offset_px.0, c + offset_px.1);
        for i in 0..s {
            for j in 0..s {
                let (dx, dy) = (j as f64 + 0.5 - ox, i as f64 + 0.5 - oy);
                if dx * dx + dy * dy <= r * r {
                    out[i * s + j] += a;
                }
            }
        }
    }
    add_noise_and_clip(&mut out, cfg.sigma_tactile, seed);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bright_count(cfg: &EnvConfig, p: f64) -> usize {
        let quiet = render_tactile(cfg, 0.0, (0.0, 0.0), Side::Left, 1);
        let f = render_tactile(cfg, p, (0.0, 0.0), Side::Left, 1);
        f.iter().zip(&quiet).filter(|(a, b)| (*a - *b) as f64 > cfg.tau).count()
    }

    #[test]
    fn zero_pressure_is_background_only() {
        let cfg = EnvConfig { sigma_tactile: 0.0, ..EnvConfig::default() };
        let f = render_tactile(&cfg, 0.0, (3.0, 0.0), Side::Right, 9);
        for (v, sp) in f.iter().zip(speckle(&cfg, Side::Right)) {
            assert!((v - (0.1 + sp)).abs() < 1e-6);
        }
    }

    #[test]
    fn disk_area_tracks_pressure() {
        let cfg = EnvConfig::default();
        let a1 = bright_count(&cfg, 0.1) as f64;
        let a2 = bright_count(&cfg, 0.2) as f64;
        assert!((a2 / a1 - 2.0).abs() < 0.2, "{a1} {a2}");
        let l = bright_count(&cfg, 0.3) as f64;
        let r = bright_count(&cfg, 0.1) as f64;
        assert!((l / r - 3.0).abs() < 0.3, "{l} {r}");
    }

    #[test]
    fn disk_count_is_monotone_in_pressure() {
        let cfg = EnvConfig::default();
        let counts: Vec<usize> = [0.0, 0.25, 0.5, 1.0].iter().map(|k| bright_count(&cfg, k * cfg.p_ref)).collect();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
        assert_eq!(counts[0], 0);
    }

    #[test]
    fn erased_board_shows_only_marker() {
        let cfg = EnvConfig { sigma_vision: 0.0, ..EnvConfig::default() };
        let ink = vec![0.0; cfg.grid_size * cfg.grid_size];
        let f = render_vision_wipe(&cfg, &ink, 0.5, 0.5, 0);
        let marker = f.iter().filter(|v| **v == MARKER_LEVEL).count();
        let bg = f.iter().filter(|v| **v == VISION_BACKGROUND).count();
        assert!(marker > 0);
        assert_eq!(marker + bg, f.len());
    }

    #[test]
    fn mean_pixel_falls_as_ink_grows() {
        let cfg = EnvConfig::default();
        let n = cfg.grid_size * cfg.grid_size;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut ink = vec![0.0; n];
        let mut prev = f64::INFINITY;
        for k in 1..=20 {
            for &c in &order[(k - 1) * n / 20..k * n / 20] {
                ink[c] = 1.0;
            }
            let f = render_vision_wipe(&cfg, &ink, 0.5, 0.5, 11);
            let mean = f.iter().map(|v| *v as f64).sum::<f64>() / f.len() as f64;
            assert!(mean < prev);
            prev = mean;
        }
    }
}
