use std::path::{Path, PathBuf};

use crate::data_io::image::{write_pgm, write_ppm};
use crate::data_io::{fmt6, read_metrics, write_atomic};
use crate::error::{Error, Result};
use crate::simenv::Outcome;

const BAR: usize = 24;
const GAP: usize = 8;
const HEIGHT: usize = 256;
const COLOURS: [[u8; 3]; 5] = [[46, 139, 87], [70, 130, 180], [205, 92, 92], [218, 165, 32], [105, 105, 105]];

/// Per-variant tallies recomputed from metrics rows.
#[derive(Clone, Debug, PartialEq)]
pub struct VariantStats {
    pub variant: String,
    pub episodes: usize,
    /// Counts in [`Outcome::ALL`] order.
    pub counts: [usize; 5],
}

impl VariantStats {
    pub fn success_rate(&self) -> f64 {
        self.counts[0] as f64 / self.episodes.max(1) as f64
    }
}

/// Bar height in pixels for a rate in `[0, 1]`.
pub fn bar_pixels(rate: f64) -> usize {
    (rate.clamp(0.0, 1.0) * (HEIGHT - 1) as f64).round() as usize
}

pub fn tally(rows: &[crate::data_io::MetricsRow]) -> Result<Vec<VariantStats>> {
    let mut out: Vec<VariantStats> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let o: Outcome = r.outcome.parse().map_err(|_| Error::Parse { line: i + 2, msg: format!("unknown outcome {:?}", r.outcome) })?;
        let k = Outcome::ALL.iter().position(|x| *x == o).unwrap();
        let idx = match out.iter().position(|s| s.variant == r.variant) {
            Some(j) => j,
            None => {
                out.push(VariantStats { variant: r.variant.clone(), episodes: 0, counts: [0; 5] });
                out.len() - 1
            }
        };
        out[idx].episodes += 1;
        out[idx].counts[k] += 1;
    }
    Ok(out)
}

/// Success-rate bars (PGM), outcome-stacked bars (PPM) and the numeric table.
pub fn plot(metrics_csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let stats = tally(&read_metrics(metrics_csv)?)?;
    std::fs::create_dir_all(out_dir)?;
    let width = GAP + stats.len() * (BAR + GAP);

    let mut grey = vec![255u8; width * HEIGHT];
    let mut colour = vec![[255u8; 3]; width * HEIGHT];
    for (i, s) in stats.iter().enumerate() {
        let x0 = GAP + i * (BAR + GAP);
        let h = bar_pixels(s.success_rate());
        for y in HEIGHT - h..HEIGHT {
            grey[y * width + x0..y * width + x0 + BAR].fill(0);
        }
        let mut base = HEIGHT;
        let mut cum = 0;
        for (k, c) in s.counts.iter().enumerate() {
            cum += c;
            let top = HEIGHT - bar_pixels(cum as f64 / s.episodes.max(1) as f64);
            for y in top..base {
                colour[y * width + x0..y * width + x0 + BAR].fill(COLOURS[k]);
            }
            base = top;
        }
    }
    let bars = out_dir.join("success.pgm");
    let stacked = out_dir.join("outcomes.ppm");
    write_pgm(&bars, width, HEIGHT, &grey)?;
    write_ppm(&stacked, width, HEIGHT, &colour)?;

    let mut table = String::from("variant,episodes,success_rate");
    Outcome::ALL.iter().for_each(|o| table += &format!(",{}", o.as_str()));
    table.push('\n');
    for s in &stats {
        table += &format!("{},{},{}", s.variant, s.episodes, fmt6(s.success_rate()));
        s.counts.iter().for_each(|c| table += &format!(",{c}"));
        table.push('\n');
    }
    let tp = out_dir.join("table.csv");
    write_atomic(&tp, table.as_bytes())?;
    Ok(vec![bars, stacked, tp])
}
