use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::EnvConfig;
use super::render::{noise_seed, render_tactile, render_vision_wipe, Side};
use super::{gaussian, ActionCommand, Observation, Truth};
use crate::numerics::rng_for;

const LINE_LENGTH: f64 = 0.66;
const END_MARGIN: f64 = 0.03;
const EXPERT_SPEED: f64 = 0.012;
const EXPERT_GAIN: f64 = 0.3;
const MOVE_PRESSURE: f64 = 0.15;
const JITTER: f64 = 0.001;

/// Ink path as a polyline with strictly increasing x.
#[derive(Clone, Debug, PartialEq)]
pub struct WipeLine {
    pub points: Vec<(f64, f64)>,
}

impl WipeLine {
    pub fn x_start(&self) -> f64 {
        self.points[0].0
    }

    pub fn x_end(&self) -> f64 {
        self.points[self.points.len() - 1].0
    }

    /// Line height at `x`, held constant beyond the ends.
    pub fn y_at(&self, x: f64) -> f64 {
        let pts = &self.points;
        if x <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x <= x1 {
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            }
        }
        pts[pts.len() - 1].1
    }

    pub fn distance(&self, x: f64, y: f64) -> f64 {
        self.points
            .windows(2)
            .map(|w| {
                let ((ax, ay), (bx, by)) = (w[0], w[1]);
                let (vx, vy) = (bx - ax, by - ay);
                let t = (((x - ax) * vx + (y - ay) * vy) / (vx * vx + vy * vy)).clamp(0.0, 1.0);
                ((x - ax - t * vx).powi(2) + (y - ay - t * vy).powi(2)).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Mean line height, used to bucket lines into top / middle / bottom bands.
    pub fn mean_y(&self) -> f64 {
        let n = 64;
        (0..n).map(|i| self.y_at(self.x_start() + LINE_LENGTH * (i as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WipeState {
    pub x: f64,
    pub y: f64,
    /// Commanded absolute height; the board surface underneath is hidden.
    pub z_cmd: f64,
    pub theta: f64,
    /// `G×G` occupancy.
    pub ink: Vec<f32>,
    pub initial_ink: usize,
    pub line: WipeLine,
    /// Board surface `h(x) = h0 + slope·(x − x_start)`.
    pub surface_h0: f64,
    pub surface_slope: f64,
    pub silicone_damaged: bool,
    /// Disk displacement of each sensor at the current step, in pixels.
    pub shear: [(f64, f64); 2],
}

impl WipeState {
    pub fn reset(cfg: &EnvConfig, seed: u64) -> Self {
        let mut rng = rng_for(seed, "wipe/reset");
        let x_s = rng.gen_range(0.12..0.22);
        let y0 = rng.gen_range(0.15..0.85);
        let clampy = |y: f64| y.clamp(0.08, 0.92);
        let points = if rng.gen_bool(0.75) {
            let m: f64 = rng.gen_range(-0.1..0.1);
            vec![(x_s, clampy(y0)), (x_s + LINE_LENGTH, clampy(y0 + m * LINE_LENGTH))]
        } else {
            let mut pts = vec![(x_s, clampy(y0))];
            for k in 1..=3 {
                pts.push((x_s + LINE_LENGTH * k as f64 / 3.0, clampy(y0 + rng.gen_range(-0.08..0.08))));
            }
            pts
        };
        let line = WipeLine { points };
        let surface_slope = rng.gen_range(-1.0..1.0);
        let surface_h0 = rng.gen_range(-0.1..0.1);
        let x = x_s + rng.gen_range(-0.01..0.01);
        let y = line.y_at(x) + rng.gen_range(-0.01..0.01);
        let z_rel = rng.gen_range(0.05..0.3);

        let g = cfg.grid_size;
        let mut ink = vec![0.0f32; g * g];
        for i in 0..g {
            for j in 0..g {
                let (cx, cy) = ((j as f64 + 0.5) / g as f64, (i as f64 + 0.5) / g as f64);
                if line.distance(cx, cy) <= cfg.line_half_width {
                    ink[i * g + j] = 1.0;
                }
            }
        }
        let initial_ink = ink.iter().filter(|v| **v > 0.0).count();
        let mut s = Self {
            x,
            y,
            z_cmd: 0.0,
            theta: 0.0,
            ink,
            initial_ink,
            line,
            surface_h0,
            surface_slope,
            silicone_damaged: false,
            shear: [(0.0, 0.0); 2],
        };
        s.z_cmd = z_rel + s.surface(x);
        s
    }

    pub fn surface(&self, x: f64) -> f64 {
        self.surface_h0 + self.surface_slope * (x - self.line.x_start())
    }

    /// Height above the board surface; contact iff `z ≤ 0`.
    pub fn z(&self) -> f64 {
        self.z_cmd - self.surface(self.x)
    }

    pub fn pressure(&self) -> f64 {
        (-self.z()).max(0.0)
    }

    /// `(p_l, p_r)` with `p_l + p_r = p`.
    pub fn pressure_split(&self) -> (f64, f64) {
        let p = self.pressure();
        let pl = p * (1.0 + self.theta) / 2.0;
        (pl, p - pl)
    }

    pub fn erased_fraction(&self) -> f64 {
        if self.initial_ink == 0 {
            return 1.0;
        }
        let left = self.ink.iter().filter(|v| **v > 0.0).count();
        1.0 - left as f64 / self.initial_ink as f64
    }

    fn shear_px(&self) -> f64 {
        self.shear.iter().map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max)
    }

    /// Returns true when the pass has ended.
    pub(crate) fn step(&mut self, cfg: &EnvConfig, a: &ActionCommand) -> bool {
        let [dx, dy, dz, dth, _] = a.0.map(|v| v as f64);
        let (x0, y0) = (self.x, self.y);
        self.x = (self.x + dx).clamp(0.0, 1.0);
        self.y = (self.y + dy).clamp(0.0, 1.0);
        self.z_cmd = (self.z_cmd + dz).clamp(-2.0, 2.0);
        self.theta = (self.theta + dth).clamp(-1.0, 1.0);

        let p = self.pressure();
        let (vx, vy) = (self.x - x0, self.y - y0);
        let speed = vx.hypot(vy);
        let (pl, pr) = self.pressure_split();
        self.shear = [pl, pr].map(|ps| {
            if ps > 0.0 && speed > 0.0 {
                let mag = cfg.shear_gain * ps * speed / cfg.delta_limit as f64;
                (mag * vx / speed, mag * vy / speed)
            } else {
                (0.0, 0.0)
            }
        });
        if p > cfg.p_break {
            self.silicone_damaged = true;
        }
        if p >= cfg.p_min && p <= cfg.p_max {
            let g = cfg.grid_size;
            let r2 = cfg.eraser_radius * cfg.eraser_radius;
            for i in 0..g {
                for j in 0..g {
                    let (cx, cy) = ((j as f64 + 0.5) / g as f64, (i as f64 + 0.5) / g as f64);
                    if (cx - self.x).powi(2) + (cy - self.y).powi(2) <= r2 {
                        self.ink[i * g + j] = 0.0;
                    }
                }
            }
        }
        self.x >= self.line.x_end() + END_MARGIN
    }

    pub(crate) fn observe(&self, cfg: &EnvConfig, seed: u64, step: usize) -> Observation {
        let (pl, pr) = self.pressure_split();
        Observation {
            vision: render_vision_wipe(cfg, &self.ink, self.x, self.y, noise_seed(seed, step, "vision")),
            tactile_l: render_tactile(cfg, pl, self.shear[0], Side::Left, noise_seed(seed, step, "left")),
            tactile_r: render_tactile(cfg, pr, self.shear[1], Side::Right, noise_seed(seed, step, "right")),
            proprio: [self.x as f32, self.y as f32, self.z_cmd as f32, self.theta as f32, 0.0],
        }
    }

    pub(crate) fn truth(&self, _cfg: &EnvConfig) -> Truth {
        Truth {
            pressure: self.pressure() as f32,
            progress: self.erased_fraction() as f32,
            shear_px: self.shear_px() as f32,
            damaged: self.silicone_damaged,
        }
    }

    /// Descend until in contact, regulate pressure to the band centre, and sweep
    /// left to right along the line.
    pub(crate) fn expert(&self, cfg: &EnvConfig, rng: &mut ChaCha8Rng) -> ActionCommand {
        let p = self.pressure();
        let lim = cfg.delta_limit as f64;
        let dz = if p < cfg.p_min { -lim } else { EXPERT_GAIN * (p - cfg.pressure_target()) };
        let dx = if p >= MOVE_PRESSURE { EXPERT_SPEED } else { 0.0 };
        let dy = 0.5 * (self.line.y_at(self.x + dx) - self.y);
        let dth = -0.5 * self.theta;
        ActionCommand::new(
            dx as f32 + gaussian(rng, JITTER),
            dy as f32 + gaussian(rng, JITTER),
            dz as f32 + gaussian(rng, JITTER),
            dth as f32,
            0.0,
        )
    }
}
