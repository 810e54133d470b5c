use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::EnvConfig;
use super::render::{noise_seed, render_tactile, render_vision_pick, Side};
use super::{gaussian, ActionCommand, Observation, Truth};
use crate::numerics::rng_for;

const ALIGN_TOL: f64 = 0.03;
const JAW_DEPTH: f64 = 0.06;
const GRASP_HEIGHT: f64 = 0.04;
const LIFT_DONE: f64 = 0.3;
/// Largest initial gripper offset from the chip centre.
const START_OFFSET: f64 = 0.02;
const FORCE_LAG: f64 = 0.5;
const HOLD_FORCE: f64 = 0.1;
const OPEN_APERTURE: f64 = 0.65;
const FINE_RATE: f64 = 0.01;
const JITTER: f64 = 0.001;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PickPhase {
    Approach,
    Grasp,
    Lift,
    Place,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PickState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Jaw aperture.
    pub g: f64,
    /// Grip force.
    pub f: f64,
    pub chip_x: f64,
    pub chip_y: f64,
    /// Lift height of the chip above the table.
    pub chip_z: f64,
    pub chip_width: f64,
    pub stiffness: f64,
    pub chip_intact: bool,
    pub held: bool,
    pub phase: PickPhase,
}

impl PickState {
    pub fn reset(_cfg: &EnvConfig, seed: u64) -> Self {
        let mut rng = rng_for(seed, "pick/reset");
        let chip_x = rng.gen_range(0.3..0.7);
        let chip_y = rng.gen_range(0.3..0.7);
        let chip_width = rng.gen_range(0.35..0.5);
        let stiffness = rng.gen_range(2.0..4.0);
        let x = chip_x + rng.gen_range(-START_OFFSET..START_OFFSET);
        let y = chip_y + rng.gen_range(-START_OFFSET..START_OFFSET);
        Self {
            x,
            y,
            z: 0.2,
            g: OPEN_APERTURE,
            f: 0.0,
            chip_x,
            chip_y,
            chip_z: 0.0,
            chip_width,
            stiffness,
            chip_intact: true,
            held: false,
            phase: PickPhase::Approach,
        }
    }

    fn in_jaws(&self) -> bool {
        (self.x - self.chip_x).abs() <= ALIGN_TOL && (self.y - self.chip_y).abs() <= ALIGN_TOL && self.z - self.chip_z <= JAW_DEPTH
    }

    /// Grip-force equilibrium for the current aperture.
    pub fn squeeze_force(&self) -> f64 {
        if self.in_jaws() {
            self.stiffness * (self.chip_width - self.g).max(0.0)
        } else {
            0.0
        }
    }

    pub(crate) fn step(&mut self, cfg: &EnvConfig, a: &ActionCommand) -> bool {
        let [dx, dy, dz, _, dg] = a.0.map(|v| v as f64);
        let (x0, y0, z0) = (self.x, self.y, self.z);
        self.x = (self.x + dx).clamp(0.0, 1.0);
        self.y = (self.y + dy).clamp(0.0, 1.0);
        self.z = (self.z + dz).clamp(0.0, 0.4);
        self.g = (self.g + dg).clamp(0.0, 0.8);
        if self.held {
            self.chip_x += self.x - x0;
            self.chip_y += self.y - y0;
            self.chip_z = (self.chip_z + self.z - z0).max(0.0);
        }
        self.f += FORCE_LAG * (self.squeeze_force() - self.f);
        if self.f > cfg.f_break {
            self.chip_intact = false;
        }
        self.held = self.in_jaws() && self.f >= HOLD_FORCE && self.chip_intact;
        if !self.held {
            self.chip_z = 0.0;
        }
        let done = self.z >= LIFT_DONE;
        self.phase = if self.held && done {
            PickPhase::Place
        } else if self.held && self.chip_z > 0.0 {
            PickPhase::Lift
        } else if self.in_jaws() {
            PickPhase::Grasp
        } else {
            PickPhase::Approach
        };
        done
    }

    pub(crate) fn observe(&self, cfg: &EnvConfig, seed: u64, step: usize) -> Observation {
        Observation {
            vision: render_vision_pick(
                cfg,
                (self.chip_x, self.chip_y, self.chip_width),
                self.x,
                self.y,
                self.g,
                noise_seed(seed, step, "vision"),
            ),
            tactile_l: render_tactile(cfg, self.f, (0.0, 0.0), Side::Left, noise_seed(seed, step, "left")),
            tactile_r: render_tactile(cfg, self.f, (0.0, 0.0), Side::Right, noise_seed(seed, step, "right")),
            proprio: [self.x as f32, self.y as f32, self.z as f32, 0.0, self.g as f32],
        }
    }

    pub(crate) fn truth(&self) -> Truth {
        Truth { pressure: self.f as f32, progress: self.chip_z as f32, shear_px: 0.0, damaged: !self.chip_intact }
    }

    /// Centre over the chip, descend, close to the aperture that yields the
    /// target force for this chip's width and stiffness, then lift once settled.
    pub(crate) fn expert(&self, cfg: &EnvConfig, rng: &mut ChaCha8Rng) -> ActionCommand {
        let lim = cfg.delta_limit as f64;
        let (ex, ey) = (self.chip_x - self.x, self.chip_y - self.y);
        let mut a = [ex.clamp(-lim, lim), ey.clamp(-lim, lim), 0.0, 0.0, 0.0];
        let g_star = self.chip_width - cfg.force_target() / self.stiffness;
        let settled = self.held && (self.g - g_star).abs() < 2e-3 && (self.f - cfg.force_target()).abs() < 0.02;
        if settled || self.chip_z > 0.02 {
            a[2] = lim;
        } else if ex.abs().max(ey.abs()) < 0.02 {
            if self.z > GRASP_HEIGHT + 1e-3 {
                a[2] = (GRASP_HEIGHT - self.z).max(-lim);
            } else {
                let rate = if self.g > self.chip_width + 0.02 { lim } else { FINE_RATE };
                a[4] = (g_star - self.g).clamp(-rate, rate);
            }
        }
        ActionCommand::new(
            a[0] as f32 + gaussian(rng, JITTER),
            a[1] as f32 + gaussian(rng, JITTER),
            a[2] as f32 + gaussian(rng, JITTER),
            0.0,
            a[4] as f32,
        )
    }
}
