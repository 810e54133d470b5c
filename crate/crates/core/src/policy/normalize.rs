/// Per-dimension min-max map onto `[-1, 1]`. Dimensions with no spread map to 0
/// and decode back to their constant value.
#[derive(Clone, Debug, PartialEq)]
pub struct MinMax {
    pub min: Vec<f32>,
    pub max: Vec<f32>,
}

impl MinMax {
    /// Fit over rows of width `dim`.
    pub fn fit<'a>(dim: usize, rows: impl IntoIterator<Item = &'a [f32]>) -> Self {
        let mut min = vec![f32::INFINITY; dim];
        let mut max = vec![f32::NEG_INFINITY; dim];
        for r in rows {
            for i in 0..dim {
                min[i] = min[i].min(r[i]);
                max[i] = max[i].max(r[i]);
            }
        }
        for i in 0..dim {
            if !min[i].is_finite() {
                min[i] = 0.0;
                max[i] = 0.0;
            }
        }
        Self { min, max }
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    fn span(&self, i: usize) -> f32 {
        self.max[i] - self.min[i]
    }

    /// Normalize a row (or any multiple of `dim` values) in place.
    pub fn normalize(&self, x: &mut [f32]) {
        let d = self.dim();
        for (k, v) in x.iter_mut().enumerate() {
            let i = k % d;
            let s = self.span(i);
            *v = if s > 1e-8 { 2.0 * (*v - self.min[i]) / s - 1.0 } else { 0.0 };
        }
    }

    pub fn denormalize(&self, x: &mut [f32]) {
        let d = self.dim();
        for (k, v) in x.iter_mut().enumerate() {
            let i = k % d;
            let s = self.span(i);
            *v = if s > 1e-8 { (*v + 1.0) * 0.5 * s + self.min[i] } else { self.min[i] };
        }
    }
}
