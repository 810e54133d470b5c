use std::fs;
use std::path::Path;

use super::container::write_atomic;
use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "run_id,task,variant,seed,episode,outcome,steps,max_pressure,residual_fraction,force_proxy,w_v,w_tl,w_tr";

/// One evaluated episode.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub run_id: String,
    pub task: String,
    pub variant: String,
    pub seed: u64,
    pub episode: usize,
    pub outcome: String,
    pub steps: usize,
    pub max_pressure: f64,
    pub residual_fraction: f64,
    pub force_proxy: f64,
    /// Mean fusion weights, NaN for variants without cross-attention.
    pub w_v: f64,
    pub w_tl: f64,
    pub w_tr: f64,
}

/// Six significant digits, `%g` style.
pub fn fmt6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mant, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..6).contains(&exp) {
        trim(&format!("{:.*}", (5 - exp).max(0) as usize, x))
    } else {
        format!("{}e{}{:02}", trim(mant), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.run_id,
            self.task,
            self.variant,
            self.seed,
            self.episode,
            self.outcome,
            self.steps,
            fmt6(self.max_pressure),
            fmt6(self.residual_fraction),
            fmt6(self.force_proxy),
            fmt6(self.w_v),
            fmt6(self.w_tl),
            fmt6(self.w_tr)
        )
    }

    pub fn parse(line: &str, lineno: usize) -> Result<Self> {
        let f: Vec<&str> = line.split(',').collect();
        let bad = |msg: String| Error::Parse { line: lineno, msg };
        if f.len() != 13 {
            return Err(bad(format!("expected 13 fields, found {}", f.len())));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad(format!("bad number {:?}", f[i])));
        let int = |i: usize| f[i].parse::<u64>().map_err(|_| bad(format!("bad integer {:?}", f[i])));
        Ok(Self {
            run_id: f[0].into(),
            task: f[1].into(),
            variant: f[2].into(),
            seed: int(3)?,
            episode: int(4)? as usize,
            outcome: f[5].into(),
            steps: int(6)? as usize,
            max_pressure: num(7)?,
            residual_fraction: num(8)?,
            force_proxy: num(9)?,
            w_v: num(10)?,
            w_tl: num(11)?,
            w_tr: num(12)?,
        })
    }
}

/// Append rows by rewriting to a temporary file and renaming, so readers see
/// either the old or the new file.
pub fn append_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let mut text = match fs::read_to_string(path) {
        Ok(t) => {
            if t.lines().next() != Some(METRICS_HEADER) {
                return Err(Error::HeaderMismatch(path.to_path_buf()));
            }
            t
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => format!("{METRICS_HEADER}\n"),
        Err(e) => return Err(e.into()),
    };
    for r in rows {
        text.push_str(&r.to_csv());
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(METRICS_HEADER) {
        return Err(Error::HeaderMismatch(path.to_path_buf()));
    }
    lines.enumerate().filter(|(_, l)| !l.is_empty()).map(|(i, l)| MetricsRow::parse(l, i + 2)).collect()
}
