use crate::error::{shape_err, Error, Result};

/// Mean and population variance of a binary image.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DynamicStats {
    pub mean: f64,
    pub var: f64,
}

/// `1` where `|f_t − f_prev| > τ`, else `0`.
pub fn residual_binarize(f_t: &[f32], f_prev: &[f32], tau: f64) -> Result<Vec<f32>> {
    if f_t.len() != f_prev.len() {
        return Err(shape_err("residual_binarize", &[f_t.len()], &[f_prev.len()]));
    }
    Ok(f_t.iter().zip(f_prev).map(|(a, b)| if ((a - b).abs() as f64) > tau { 1.0 } else { 0.0 }).collect())
}

/// Spatial mean and population variance; the variance is formed as `μ(1−μ)`,
/// which equals the two-pass variance exactly for 0/1 data.
pub fn dynamic_stats(binary: &[f32]) -> Result<DynamicStats> {
    if binary.is_empty() {
        return Err(Error::Degenerate("empty residual image".into()));
    }
    let mut ones = 0usize;
    for v in binary {
        match *v {
            x if x == 1.0 => ones += 1,
            x if x == 0.0 => {}
            _ => return Err(Error::NonBinary),
        }
    }
    let mean = ones as f64 / binary.len() as f64;
    Ok(DynamicStats { mean, var: mean * (1.0 - mean) })
}

/// Length of the dynamic feature for `sensors` sensors over a horizon `h`.
pub fn dyn_feature_len(sensors: usize, h: usize) -> usize {
    2 * sensors * h.saturating_sub(1)
}

/// `(μ, σ²)` of every adjacent frame pair, sensor-major then time-minor.
/// `windows[s][t]` is frame `t` of sensor `s`.
pub fn dynamic_feature_window<F: AsRef<[f32]>>(windows: &[&[F]], tau: f64) -> Result<Vec<f32>> {
    let mut out = Vec::new();
    for frames in windows {
        if frames.len() < 2 {
            return Err(Error::Config(format!("tactile horizon must be at least 2, got {}", frames.len())));
        }
        for pair in frames.windows(2) {
            let st = dynamic_stats(&residual_binarize(pair[1].as_ref(), pair[0].as_ref(), tau)?)?;
            out.push(st.mean as f32);
            out.push(st.var as f32);
        }
    }
    Ok(out)
}

/// Per-step stats of one sensor's frame sequence; entry 0 is zero.
pub fn sigma_series<F: AsRef<[f32]>>(frames: &[F], tau: f64) -> Result<Vec<DynamicStats>> {
    let mut out = vec![DynamicStats::default()];
    for pair in frames.windows(2) {
        out.push(dynamic_stats(&residual_binarize(pair[1].as_ref(), pair[0].as_ref(), tau)?)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binarize_conventions() {
        let a = vec![0.2f32, 0.5, 0.9];
        assert_eq!(residual_binarize(&a, &a, 0.05).unwrap(), vec![0.0; 3]);
        let b = vec![0.25f32, 0.5, 0.9];
        let c = vec![0.0f32, 0.25, 0.5];
        assert_eq!(residual_binarize(&[0.5], &[0.25], 0.25).unwrap(), vec![0.0]);
        assert_eq!(residual_binarize(&b, &c, 0.3).unwrap(), vec![0.0, 0.0, 1.0]);
        assert!(residual_binarize(&a, &a[..2], 0.05).is_err());
    }

    #[test]
    fn binarize_matches_pixel_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f32> = (0..1024).map(|_| rng.gen()).collect();
        let b: Vec<f32> = (0..1024).map(|_| rng.gen()).collect();
        let got = residual_binarize(&a, &b, 0.3).unwrap();
        for i in 0..1024 {
            let want = if (a[i] - b[i]).abs() > 0.3 { 1.0 } else { 0.0 };
            assert_eq!(got[i], want);
        }
    }

    #[test]
    fn stats_closed_forms() {
        assert_eq!(dynamic_stats(&[0.0; 16]).unwrap(), DynamicStats { mean: 0.0, var: 0.0 });
        let half: Vec<f32> = (0..16).map(|i| (i % 2) as f32).collect();
        assert_eq!(dynamic_stats(&half).unwrap(), DynamicStats { mean: 0.5, var: 0.25 });
        assert!(matches!(dynamic_stats(&[0.0, 0.5]), Err(Error::NonBinary)));
    }

    #[test]
    fn stats_match_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img: Vec<f32> = (0..1000).map(|_| if rng.gen_bool(0.3) { 1.0 } else { 0.0 }).collect();
        let st = dynamic_stats(&img).unwrap();
        let n = img.len() as f64;
        let mean = img.iter().map(|v| *v as f64).sum::<f64>() / n;
        let var = img.iter().map(|v| (*v as f64 - mean).powi(2)).sum::<f64>() / n;
        assert!((st.mean - mean).abs() < 1e-12);
        assert!((st.var - var).abs() < 1e-12);
    }

    #[test]
    fn feature_window_layout() {
        let still = vec![vec![0.3f32; 4]; 2];
        let moving = vec![vec![0.0f32; 4], vec![1.0, 1.0, 0.0, 0.0]];
        let f = dynamic_feature_window(&[&still[..], &moving[..]], 0.05).unwrap();
        assert_eq!(f, vec![0.0, 0.0, 0.5, 0.25]);
        let four = vec![vec![0.0f32; 4]; 4];
        assert_eq!(dynamic_feature_window(&[&four[..], &four[..]], 0.05).unwrap().len(), 12);
        assert_eq!(dyn_feature_len(2, 4), 12);
        assert!(dynamic_feature_window(&[&four[..1]], 0.05).is_err());
    }
}
