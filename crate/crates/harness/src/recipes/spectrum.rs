use std::path::Path;
use std::time::Instant;

use xpm_core::analytic::IfMode;

use super::{finish_run, mode_name};
use crate::config::ExperimentConfig;
use crate::error::HarnessResult;
use crate::experiment::{band_average, closer_fraction, mad_db, Analytic, Measurement, Scenario};
use crate::output::{write_csv, Cell};

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub measured_variance: f64,
    /// Per IF mode: (mode, analytic variance, MAD in dB against the measurement).
    pub analytic: Vec<(IfMode, f64, f64)>,
    /// Share of comparison bands where evolving beats constant, when both ran.
    pub evolving_closer_fraction: Option<f64>,
    pub measurement: Measurement,
    pub analytic_spectra: Vec<Analytic>,
    pub band_centers: Vec<f64>,
    pub measured_bands: Vec<f64>,
    pub analytic_bands: Vec<Vec<f64>>,
}

impl SpectrumReport {
    pub fn variance(&self, mode: IfMode) -> Option<f64> {
        self.analytic.iter().find(|a| a.0 == mode).map(|a| a.1)
    }

    pub fn mad(&self, mode: IfMode) -> Option<f64> {
        self.analytic.iter().find(|a| a.0 == mode).map(|a| a.2)
    }
}

/// Runs the SSFM oracle and the analytic model on one configuration and
/// writes per-tone and band-averaged spectra.
pub fn run_spectrum(cfg: &ExperimentConfig, out: &Path, recipe: &str) -> HarnessResult<SpectrumReport> {
    let started = Instant::now();
    let sc = Scenario::new(cfg)?;
    let m = sc.measure()?;
    let report = compare(&sc, m)?;

    let n = sc.len;
    let df = sc.df();
    let fmax = cfg.simulation.receiver_filter_ghz / 2.0;
    let mut columns = vec!["f_ghz", "measured"];
    columns.extend(report.analytic.iter().map(|a| match a.0 {
        IfMode::Evolving => "analytic_evolving",
        IfMode::Constant => "analytic_constant",
    }));
    let rows: Vec<Vec<Cell>> = (1..n / 2)
        .take_while(|k| *k as f64 * df <= fmax)
        .map(|k| {
            let mut row: Vec<Cell> = vec![(k as f64 * df).into(), (report.measurement.phase_psd[k] + report.measurement.phase_psd[n - k]).into()];
            row.extend(report.analytic_spectra.iter().map(|a| Cell::from(a.psd[k] + a.psd[n - k])));
            row
        })
        .collect();
    let hash = cfg.hash();
    write_csv(&out.join(format!("{recipe}_spectrum.csv")), recipe, &hash, &columns, &rows)?;
    let band_rows: Vec<Vec<Cell>> = report
        .band_centers
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut row: Vec<Cell> = vec![(*f).into(), report.measured_bands[i].into()];
            row.extend(report.analytic_bands.iter().map(|b| Cell::from(b[i])));
            row
        })
        .collect();
    write_csv(&out.join(format!("{recipe}_bands.csv")), recipe, &hash, &columns, &band_rows)?;
    let mut summary = vec![vec![Cell::from("measured"), report.measured_variance.into(), f64::NAN.into()]];
    for (mode, v, mad) in &report.analytic {
        summary.push(vec![mode_name(*mode).into(), (*v).into(), (*mad).into()]);
    }
    write_csv(&out.join(format!("{recipe}_variance.csv")), recipe, &hash, &["source", "variance_rad2", "mad_db"], &summary)?;

    let mut results = vec![("variance_measured".to_string(), report.measured_variance)];
    for (mode, v, mad) in &report.analytic {
        results.push((format!("variance_{}", mode_name(*mode)), *v));
        results.push((format!("mad_db_{}", mode_name(*mode)), *mad));
    }
    let files = ["spectrum", "bands", "variance"].iter().map(|s| format!("{recipe}_{s}.csv")).collect();
    finish_run(cfg, out, recipe, started, results, files)?;
    Ok(report)
}

/// Analytic spectra for every configured IF mode, compared in bands.
pub(crate) fn compare(sc: &Scenario, m: Measurement) -> HarnessResult<SpectrumReport> {
    let cfg = &sc.config;
    let [lo, hi] = cfg.simulation.comparison_range_ghz;
    let width = cfg.simulation.comparison_band_ghz;
    let df = sc.df();
    let measured = band_average(&m.phase_psd, df, lo, hi, width);
    let mut analytic = Vec::new();
    let mut spectra = Vec::new();
    let mut bands = Vec::new();
    for mode in cfg.if_modes() {
        let a = sc.analytic(&m.if_stack, mode)?;
        let b = band_average(&a.psd, df, lo, hi, width);
        analytic.push((mode, a.variance, mad_db(&b, &measured)));
        bands.push(b);
        spectra.push(a);
    }
    let evolving_closer_fraction = if bands.len() == 2 { Some(closer_fraction(&bands[0], &bands[1], &measured)) } else { None };
    Ok(SpectrumReport {
        measured_variance: m.phase_variance,
        analytic,
        evolving_closer_fraction,
        measurement: m,
        analytic_spectra: spectra,
        band_centers: measured.iter().map(|b| b.0).collect(),
        measured_bands: measured.iter().map(|b| b.1).collect(),
        analytic_bands: bands.into_iter().map(|b| b.into_iter().map(|x| x.1).collect()).collect(),
    })
}
