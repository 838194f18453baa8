use std::path::Path;
use std::time::Instant;

use xpm_core::analytic::{q_ratio_bound, q_ratio_c_averaged, q_ratio_monte_carlo, RAYLEIGH_VARIANCE_RATIO};
use xpm_core::Error;

use super::finish_run;
use crate::config::{ExperimentConfig, QRatioSection};
use crate::error::HarnessResult;
use crate::output::{write_csv, Cell};

#[derive(Debug, Clone, PartialEq)]
pub struct QRow {
    pub spans: usize,
    /// `None` for the C-averaged row.
    pub c: Option<f64>,
    /// `None` where the mean phasor sum vanishes.
    pub q: Option<f64>,
    pub ci95: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn default_q_section() -> QRatioSection {
    QRatioSection {
        spans: vec![1, 2, 5, 20, 50],
        c_values: vec![0.0, 0.1, 0.5, 1.0, 2.0, 3.0],
        c_points: 256,
        trials: 20_000,
    }
}

/// Q table for Rayleigh amplitudes of unit mean.
pub fn run_q_ratio(cfg: &ExperimentConfig, out: &Path) -> HarnessResult<Vec<QRow>> {
    let started = Instant::now();
    let q = cfg.q_ratio.clone().unwrap_or_else(default_q_section);
    let sigma = RAYLEIGH_VARIANCE_RATIO.sqrt();
    let mut rows = Vec::new();
    for (i, &n) in q.spans.iter().enumerate() {
        let seed = cfg.seed.wrapping_add(i as u64);
        for &c in &q.c_values {
            let (lower, upper) = q_ratio_bound(n, c, 1.0, sigma)?;
            let (q_mean, ci95) = match q_ratio_monte_carlo(n, c, 1.0, q.trials, seed) {
                Ok(e) => (Some(e.mean), e.ci95),
                Err(Error::UndefinedQ(_)) => (None, f64::NAN),
                Err(e) => return Err(e.into()),
            };
            rows.push(QRow { spans: n, c: Some(c), q: q_mean, ci95, lower, upper });
        }
        let avg = q_ratio_c_averaged(n, q.c_points, 1.0, q.trials, seed)?;
        rows.push(QRow { spans: n, c: None, q: Some(avg.mean), ci95: avg.ci95, lower: 1.0, upper: (4.0 / std::f64::consts::PI).sqrt() });
    }
    let table: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                r.spans.into(),
                r.c.map(Cell::from).unwrap_or_else(|| "average".into()),
                r.q.map(Cell::from).unwrap_or_else(|| "undefined".into()),
                r.ci95.into(),
                r.lower.into(),
                r.upper.into(),
            ]
        })
        .collect();
    write_csv(&out.join("q_ratio.csv"), "q-ratio", &cfg.hash(), &["spans", "c_rad", "q", "ci95", "lower", "upper"], &table)?;
    let results = rows
        .iter()
        .filter(|r| r.c.is_none())
        .map(|r| (format!("q_average@{}", r.spans), r.q.unwrap_or(f64::NAN)))
        .collect();
    finish_run(cfg, out, "q-ratio", started, results, vec!["q_ratio.csv".into()])?;
    Ok(rows)
}
