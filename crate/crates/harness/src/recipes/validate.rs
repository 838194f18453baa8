use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use xpm_core::analytic::{
    link_factor, phase_variance, phasor_sum, q_ratio_bound, q_ratio_monte_carlo, DeltaLambdaRange, IfMode, KMode,
    XpmModelConfig, RAYLEIGH_VARIANCE_RATIO,
};
use xpm_core::metrics::{evm, extract_phase, phase_psd, phase_variance_measured, EvmReference};
use xpm_core::propagation::{
    bandpass_filter, chromatic_dispersion_compensate, intensity_fluctuation_spectrum, ssfm_span, to_baseband, IfStack,
    StepConfig,
};
use xpm_core::signal::{cw_probe, generate_qam_symbols, multiplex, qam_channel, rrc_filter, rrc_shape, ConstellationSpec};
use xpm_core::units::{FiberParams, Subcarrier};

use super::finish_run;
use crate::config::ExperimentConfig;
use crate::error::{HarnessError, HarnessResult};
use crate::output::{write_csv, Cell};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

fn check(name: &'static str, value: f64, limit: f64) -> Check {
    Check { name, value, limit, passed: value <= limit }
}

fn energy_conservation(fiber: &FiberParams) -> HarnessResult<Check> {
    let lossless = FiberParams { alpha_db_per_km: 0.0, ..*fiber };
    let sub = [Subcarrier { symbol_rate_ghz: 32.0, rolloff: 0.1, center_offset_ghz: 0.0, qam_order: 16 }];
    let f = qam_channel(&sub, 0.0, 5e-3, 1 << 13, 128.0, 1, 0)?.field;
    let out = ssfm_span(&f, &lossless, &StepConfig::fixed(1.0))?;
    Ok(check("lossless energy conservation (rel/span)", (out.energy() / f.energy() - 1.0).abs(), 1e-9))
}

fn spm_phase(fiber: &FiberParams) -> HarnessResult<Check> {
    let p = 1e-3;
    let f = cw_probe(p, 256, 64.0)?;
    let out = ssfm_span(&f, fiber, &StepConfig::fixed(0.5))?;
    let phase = (out.samples()[0] / f.samples()[0]).arg();
    let expect = fiber.gamma() * p * fiber.effective_length();
    Ok(check("CW SPM phase vs gamma*P*Leff (rel)", (phase / expect - 1.0).abs(), 1e-6))
}

fn cdc_round_trip(fiber: &FiberParams) -> HarnessResult<Check> {
    let linear = FiberParams { n2: 0.0, alpha_db_per_km: 0.0, ..*fiber };
    let c = ConstellationSpec::new(16)?;
    let seq = generate_qam_symbols(c, 1 << 11, 5)?;
    let f = rrc_shape(&seq.symbols, 32.0, 0.1, 4)?;
    let out = ssfm_span(&f, &linear, &StepConfig::fixed(1.0))?;
    let back = chromatic_dispersion_compensate(&out, linear.dispersion_ps_nm_km * linear.span_length_km, linear.ref_wavelength_nm);
    let mf = rrc_filter(&back, 32.0, 0.1);
    let rx: Vec<Complex64> = mf.samples().iter().step_by(4).copied().collect();
    Ok(check("disperse + compensate EVM", evm(&rx, &c, EvmReference::Known(&seq.symbols))?, 1e-6))
}

/// Probe phase variance after one span at a coarse and a halved step.
fn step_halving(fiber: &FiberParams, step_km: f64) -> HarnessResult<Check> {
    let (n, fs) = (1 << 13, 256.0);
    let sub = [Subcarrier { symbol_rate_ghz: 32.0, rolloff: 0.0, center_offset_ghz: 0.0, qam_order: 16 }];
    let pump = qam_channel(&sub, -25.0, 1e-3, n, fs, 3, 0)?.field;
    let probe = cw_probe(1e-4, n, fs)?.with_center_offset(25.0);
    let tx = multiplex(&[pump, probe])?;
    let variance = |step: StepConfig| -> HarnessResult<f64> {
        let out = ssfm_span(&tx, fiber, &step)?;
        let rx = chromatic_dispersion_compensate(&out, fiber.dispersion_ps_nm_km * fiber.span_length_km, fiber.ref_wavelength_nm);
        let p = to_baseband(&bandpass_filter(&rx, 25.0, 32.0)?, 25.0);
        Ok(phase_variance_measured(&[extract_phase(&p)?])?)
    };
    let coarse = StepConfig::fixed(step_km);
    let a = variance(coarse)?;
    let b = variance(coarse.halved())?;
    Ok(check("step-halving change of probe phase variance (rel)", (a / b - 1.0).abs(), 1e-3))
}

fn factorization(fiber: &FiberParams) -> HarnessResult<Check> {
    let dl = 0.4;
    let amps = [1.0e-4; 7];
    let mut worst: f64 = 0.0;
    for k in 0..4096 {
        let f = k as f64 * 0.01;
        let v = phasor_sum(f, dl, &amps, IfMode::Constant, fiber, 7)?;
        let e = amps[0] * link_factor(f, dl, 7, fiber.span_length_km, fiber.dispersion_ps_nm_km);
        worst = worst.max((v - e).abs() / amps[0]);
    }
    Ok(check("constant-mode phasor sum vs link factor (rel)", worst, 1e-12))
}

fn parseval(fiber: &FiberParams) -> HarnessResult<Vec<Check>> {
    let sub = [Subcarrier { symbol_rate_ghz: 32.0, rolloff: 0.1, center_offset_ghz: 0.0, qam_order: 16 }];
    let f = qam_channel(&sub, 0.0, 1e-3, 1 << 12, 128.0, 2, 0)?.field;
    let spec = intensity_fluctuation_spectrum(&f);
    let mean = f.mean_power();
    let var = f.samples().iter().map(|z| (z.norm_sqr() - mean).powi(2)).sum::<f64>() / f.len() as f64;
    let if_check = check("IF spectrum Parseval (rel)", (spec.power_sum() / var - 1.0).abs(), 1e-9);
    let rotated: Vec<Complex64> = f.samples().iter().map(|z| Complex64::from_polar(1.0, 1e3 * (z.norm_sqr() - mean))).collect();
    let ph = extract_phase(&xpm_core::SampledField::new(rotated, 128.0)?)?;
    let set = [ph];
    let psd = phase_psd(&set)?;
    let pv = phase_variance_measured(&set)?;
    let phase_check = check("phase PSD Parseval (rel)", (psd.spectrum.power_sum() / pv - 1.0).abs(), 1e-6);
    // K ratio on the same IF spectrum
    let stack = IfStack::new(vec![spec.clone(), spec])?;
    let dl = DeltaLambdaRange::from_band(50.0, 32.0, fiber.ref_wavelength_nm)?;
    let mut m = XpmModelConfig::new(*fiber, 2, vec![dl]);
    m.k_mode = KMode::Incoherent;
    let inc = phase_variance(&m, &stack)?;
    m.k_mode = KMode::Coherent;
    let coh = phase_variance(&m, &stack)?;
    let k_check = check("incoherent/coherent variance ratio vs 4/pi (rel)", (inc / coh / (4.0 / PI) - 1.0).abs(), 1e-12);
    Ok(vec![if_check, phase_check, k_check])
}

fn q_bounds(seed: u64) -> HarnessResult<Check> {
    let sigma = RAYLEIGH_VARIANCE_RATIO.sqrt();
    let mut outside = 0.0;
    for n in [2usize, 5, 20] {
        for c in [0.2, 0.9, 2.5] {
            let q = q_ratio_monte_carlo(n, c, 1.0, 10_000, seed)?;
            let (lo, hi) = q_ratio_bound(n, c, 1.0, sigma)?;
            if q.upper() < lo || q.lower() > hi {
                outside += 1.0;
            }
        }
    }
    Ok(check("Q Monte-Carlo estimates outside bounds (count)", outside, 0.0))
}

/// Runs the invariant suite. Any failed check yields a gate error after the
/// report is written.
pub fn run_validate(cfg: &ExperimentConfig, out: &Path) -> HarnessResult<Vec<Check>> {
    let started = Instant::now();
    let fiber = cfg.fiber_params();
    let mut checks = vec![
        energy_conservation(&fiber)?,
        spm_phase(&fiber)?,
        cdc_round_trip(&fiber)?,
        step_halving(&fiber, cfg.simulation.step_km)?,
        factorization(&fiber)?,
    ];
    checks.extend(parseval(&fiber)?);
    checks.push(q_bounds(cfg.seed)?);
    let rows: Vec<Vec<Cell>> = checks
        .iter()
        .map(|c| vec![c.name.into(), c.value.into(), c.limit.into(), (if c.passed { "PASS" } else { "FAIL" }).into()])
        .collect();
    write_csv(&out.join("validate.csv"), "validate", &cfg.hash(), &["check", "value", "limit", "status"], &rows)?;
    let results = checks.iter().map(|c| (c.name.to_string(), c.value)).collect();
    finish_run(cfg, out, "validate", started, results, vec!["validate.csv".into()])?;
    Ok(checks)
}

/// Turns failed checks into a gate error.
pub fn gate(checks: &[Check]) -> HarnessResult<()> {
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Gate(failed.join("; ")))
    }
}
