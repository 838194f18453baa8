use std::path::Path;
use std::time::Instant;

use xpm_core::analytic::IfMode;

use super::{finish_run, mode_name};
use crate::config::{ExperimentConfig, SweepParameter};
use crate::error::{HarnessError, HarnessResult};
use crate::experiment::Scenario;
use crate::output::{write_csv, Cell};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub measured: f64,
    pub analytic: Vec<(IfMode, f64)>,
}

impl SweepRow {
    pub fn analytic(&self, mode: IfMode) -> Option<f64> {
        self.analytic.iter().find(|a| a.0 == mode).map(|a| a.1)
    }
}

/// Configuration for one sweep point. Distance is in km and must be a whole
/// number of spans.
pub fn apply_sweep_value(cfg: &ExperimentConfig, parameter: SweepParameter, value: f64) -> HarnessResult<ExperimentConfig> {
    let mut c = cfg.clone();
    match parameter {
        SweepParameter::Distance => {
            let spans = value / cfg.fiber.span_length_km;
            if (spans - spans.round()).abs() > 1e-9 || spans.round() < 1.0 {
                return Err(HarnessError::Config(format!(
                    "sweep.values: {value} km is not a whole number of {} km spans",
                    cfg.fiber.span_length_km
                )));
            }
            c.link.num_spans = spans.round() as usize;
        }
        SweepParameter::Dispersion => c.fiber.dispersion_ps_nm_km = value,
        SweepParameter::Spacing => {
            c.pump.channel_spacing_ghz = value;
            c.simulation.sample_rate_ghz = None;
        }
        SweepParameter::Power => c.pump.power_dbm = value,
    }
    c.sweep = None;
    c.validate()?;
    Ok(c)
}

/// Variance against one swept parameter. All points share the master seed.
pub fn run_sweep(cfg: &ExperimentConfig, out: &Path) -> HarnessResult<Vec<SweepRow>> {
    let started = Instant::now();
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| HarnessError::Config("sweep: section missing".into()))?;
    let mut rows = Vec::with_capacity(sweep.values.len());
    for &v in &sweep.values {
        let point = apply_sweep_value(cfg, sweep.parameter, v)?;
        let sc = Scenario::new(&point)?;
        let m = sc.measure()?;
        let analytic = point
            .if_modes()
            .into_iter()
            .map(|mode| sc.analytic(&m.if_stack, mode).map(|a| (mode, a.variance)))
            .collect::<HarnessResult<Vec<_>>>()?;
        rows.push(SweepRow { value: v, measured: m.phase_variance, analytic });
    }
    let name = match sweep.parameter {
        SweepParameter::Distance => "distance_km",
        SweepParameter::Dispersion => "dispersion_ps_nm_km",
        SweepParameter::Spacing => "spacing_ghz",
        SweepParameter::Power => "power_dbm",
    };
    let mut columns = vec![name, "variance_measured"];
    let modes = cfg.if_modes();
    columns.extend(modes.iter().map(|m| match m {
        IfMode::Evolving => "variance_evolving",
        IfMode::Constant => "variance_constant",
    }));
    let table: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            let mut row: Vec<Cell> = vec![r.value.into(), r.measured.into()];
            row.extend(r.analytic.iter().map(|a| Cell::from(a.1)));
            row
        })
        .collect();
    write_csv(&out.join("sweep.csv"), "sweep", &cfg.hash(), &columns, &table)?;
    let mut results = Vec::new();
    for r in &rows {
        results.push((format!("measured@{}", r.value), r.measured));
        for (m, v) in &r.analytic {
            results.push((format!("{}@{}", mode_name(*m), r.value), *v));
        }
    }
    finish_run(cfg, out, "sweep", started, results, vec!["sweep.csv".into()])?;
    Ok(rows)
}
