/// Simulator constants. Everything that shapes observations or outcomes lives here
/// so datasets and checkpoints can snapshot it.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    /// Vision frame side in pixels.
    pub vision_size: usize,
    /// Tactile frame side in pixels.
    pub tactile_size: usize,
    /// Ink raster side in cells.
    pub grid_size: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub p_break: f64,
    pub p_ref: f64,
    pub f_lo: f64,
    pub f_hi: f64,
    pub f_break: f64,
    pub sigma_vision: f64,
    pub sigma_tactile: f64,
    pub step_cap: usize,
    pub delta_limit: f32,
    /// Gel background level.
    pub tactile_background: f64,
    /// Half-range of the fixed gel speckle texture.
    pub tactile_speckle: f64,
    /// Contact-disk radius (pixels) at `p_ref`.
    pub disk_radius: f64,
    /// Contact-disk amplitude at and above `p_ref`.
    pub disk_amplitude: f64,
    /// Disk-centre offset in pixels per unit side pressure at full per-step speed.
    pub shear_gain: f64,
    /// Fraction of the tactile side beyond which the disk counts as out of view.
    pub shear_margin: f64,
    /// Eraser footprint radius in board units.
    pub eraser_radius: f64,
    /// Half-width of the drawn line in board units.
    pub line_half_width: f64,
    /// Residual-ink fraction above which a wipe floats.
    pub float_residual: f64,
    /// Relative force-proxy discrepancy tolerated for a pick.
    pub force_tolerance: f64,
    /// Binarization threshold for tactile residuals.
    pub tau: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            vision_size: 48,
            tactile_size: 32,
            grid_size: 48,
            p_min: 0.05,
            p_max: 0.5,
            p_break: 0.8,
            p_ref: 0.5,
            f_lo: 0.3,
            f_hi: 0.7,
            f_break: 0.85,
            sigma_vision: 0.01,
            sigma_tactile: 0.01,
            step_cap: 200,
            delta_limit: 0.05,
            tactile_background: 0.1,
            tactile_speckle: 0.03,
            disk_radius: 12.0,
            disk_amplitude: 0.8,
            shear_gain: 164.0,
            shear_margin: 0.4,
            eraser_radius: 0.045,
            line_half_width: 0.025,
            float_residual: 0.25,
            force_tolerance: 0.2,
            tau: 0.05,
        }
    }
}

impl EnvConfig {
    /// Mid-band wiping pressure target.
    pub fn pressure_target(&self) -> f64 {
        0.5 * (self.p_min + self.p_max)
    }

    /// Mid-band grip-force target.
    pub fn force_target(&self) -> f64 {
        0.5 * (self.f_lo + self.f_hi)
    }

    /// Disk displacement (pixels) beyond which contact slid out of view.
    pub fn shear_limit_px(&self) -> f64 {
        self.shear_margin * self.tactile_size as f64
    }

    /// Flat `(key, value)` listing in a fixed order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("env.vision_size", self.vision_size.to_string()),
            ("env.tactile_size", self.tactile_size.to_string()),
            ("env.grid_size", self.grid_size.to_string()),
            ("env.p_min", self.p_min.to_string()),
            ("env.p_max", self.p_max.to_string()),
            ("env.p_break", self.p_break.to_string()),
            ("env.p_ref", self.p_ref.to_string()),
            ("env.f_lo", self.f_lo.to_string()),
            ("env.f_hi", self.f_hi.to_string()),
            ("env.f_break", self.f_break.to_string()),
            ("env.sigma_vision", self.sigma_vision.to_string()),
            ("env.sigma_tactile", self.sigma_tactile.to_string()),
            ("env.step_cap", self.step_cap.to_string()),
            ("env.delta_limit", self.delta_limit.to_string()),
            ("env.tactile_background", self.tactile_background.to_string()),
            ("env.tactile_speckle", self.tactile_speckle.to_string()),
            ("env.disk_radius", self.disk_radius.to_string()),
            ("env.disk_amplitude", self.disk_amplitude.to_string()),
            ("env.shear_gain", self.shear_gain.to_string()),
            ("env.shear_margin", self.shear_margin.to_string()),
            ("env.eraser_radius", self.eraser_radius.to_string()),
            ("env.line_half_width", self.line_half_width.to_string()),
            ("env.float_residual", self.float_residual.to_string()),
            ("env.force_tolerance", self.force_tolerance.to_string()),
            ("env.tau", self.tau.to_string()),
        ]
    }

    /// Set one `env.*` key; returns `Ok(false)` if the key is not an env key.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<bool, String> {
        fn p<T: std::str::FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.trim().parse().map_err(|_| format!("bad value {v:?} for {key}"))
        }
        match key {
            "env.vision_size" => self.vision_size = p(key, value)?,
            "env.tactile_size" => self.tactile_size = p(key, value)?,
            "env.grid_size" => self.grid_size = p(key, value)?,
            "env.p_min" => self.p_min = p(key, value)?,
            "env.p_max" => self.p_max = p(key, value)?,
            "env.p_break" => self.p_break = p(key, value)?,
            "env.p_ref" => self.p_ref = p(key, value)?,
            "env.f_lo" => self.f_lo = p(key, value)?,
            "env.f_hi" => self.f_hi = p(key, value)?,
            "env.f_break" => self.f_break = p(key, value)?,
            "env.sigma_vision" => self.sigma_vision = p(key, value)?,
            "env.sigma_tactile" => self.sigma_tactile = p(key, value)?,
            "env.step_cap" => self.step_cap = p(key, value)?,
            "env.delta_limit" => self.delta_limit = p(key, value)?,
            "env.tactile_background" => self.tactile_background = p(key, value)?,
            "env.tactile_speckle" => self.tactile_speckle = p(key, value)?,
            "env.disk_radius" => self.disk_radius = p(key, value)?,
            "env.disk_amplitude" => self.disk_amplitude = p(key, value)?,
            "env.shear_gain" => self.shear_gain = p(key, value)?,
            "env.shear_margin" => self.shear_margin = p(key, value)?,
            "env.eraser_radius" => self.eraser_radius = p(key, value)?,
            "env.line_half_width" => self.line_half_width = p(key, value)?,
            "env.float_residual" => self.float_residual = p(key, value)?,
            "env.force_tolerance" => self.force_tolerance = p(key, value)?,
            "env.tau" => self.tau = p(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}
