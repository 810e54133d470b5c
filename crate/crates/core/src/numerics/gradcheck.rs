//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;

use super::params::{rng_for, ParamStore};

#[derive(Clone, Debug, Default)]
pub struct FdReport {
    pub max_rel_err: f64,
    pub checked: usize,
    /// `(param, index, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
}

/// Compare the gradients stored on `params` against `(f(θ+h)−f(θ−h))/2h`.
///
/// Evaluation happens in `f64`. At most `max_coords` coordinates per parameter
/// tensor are sampled (all of them for small tensors). The relative error uses
/// the denominator `max(|analytic|, |numeric|, 1e-6)`.
pub fn finite_diff_check<F>(f: F, params: &ParamStore<f64>, h: f64, max_coords: usize, seed: u64) -> FdReport
where
    F: Fn(&ParamStore<f64>) -> f64,
{
    let mut report = FdReport::default();
    let mut work = params.detached();
    let names: Vec<String> = params.names().cloned().collect();
    for name in names {
        let t = params.get(&name).expect("param");
        let analytic = t.grad.clone().unwrap_or_else(|| vec![0.0; t.len()]);
        let coords: Vec<usize> = if t.len() <= max_coords {
            (0..t.len()).collect()
        } else {
            let mut rng = rng_for(seed, &name);
            let mut idx = sample(&mut rng, t.len(), max_coords).into_vec();
            idx.sort_unstable();
            idx
        };
        for i in coords {
            let orig = t.data()[i];
            work.get_mut(&name).unwrap().data_mut()[i] = orig + h;
            let up = f(&work);
            work.get_mut(&name).unwrap().data_mut()[i] = orig - h;
            let down = f(&work);
            work.get_mut(&name).unwrap().data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            report.checked += 1;
            if report.worst.is_none() || rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst = Some((name.clone(), i, a, numeric));
            }
        }
    }
    report
}
