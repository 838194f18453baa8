//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `XPM_ACCEPT_ONLY=2,4` restricts the run to the listed criteria.
//! `XPM_PAPER_PRESET=1` runs criterion 6 at full reference statistics
//! (hours on one core) instead of the reduced symbol count.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use xpm_core::analytic::{
    link_factor, phase_variance, phasor_sum, q_ratio_c_averaged, q_ratio_monte_carlo, single_tone_phase_amplitude,
    xpm_efficiency, DeltaLambdaRange, IfMode, KMode, XpmModelConfig,
};
use xpm_core::ber::{ber_phase_noise, BerQuery};
use xpm_core::metrics::extract_phase;
use xpm_core::propagation::{bandpass_filter, chromatic_dispersion_compensate, ssfm_span, to_baseband, IfStack, StepConfig};
use xpm_core::signal::{multiplex, stream_rng};
use xpm_core::units::{spacing_to_delta_lambda, FiberParams};
use xpm_core::{SampledField, Spectrum};
use xpm_harness::config::{
    BerSection, ExperimentConfig, Preset, ProbeType, QRatioSection, SweepParameter, SweepSection,
};
use xpm_harness::recipes::{run_ber, run_q_ratio, run_spectrum, run_sweep, run_validate, SpectrumReport, SweepRow};

type Res<T> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Res<Outcome> {
    Ok(Outcome { passed, detail })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn tmp() -> Res<tempfile::TempDir> {
    Ok(tempfile::tempdir()?)
}

fn desk() -> ExperimentConfig {
    ExperimentConfig::preset(Preset::Desk)
}

fn c1_identities() -> Res<Outcome> {
    let fiber = FiberParams::default();
    let mut worst_eta: f64 = 0.0;
    for dl in [0.05, 0.4, 1.6, 6.4] {
        worst_eta = worst_eta.max((xpm_efficiency(0.0, dl, &fiber) - 1.0).abs());
    }
    // f -> 0 from above as well as at 0
    let mut worst_link: f64 = 0.0;
    for n in [1usize, 2, 5, 10, 50] {
        for f in [0.0, 1e-9, 1e-7] {
            let v = link_factor(f, 0.4, n, fiber.span_length_km, fiber.dispersion_ps_nm_km);
            worst_link = worst_link.max(rel(v, n as f64));
        }
    }
    // constant mode reads only the first-span amplitude
    let mut worst_fact: f64 = 0.0;
    for n in [1usize, 3, 10, 20] {
        let amps: Vec<f64> = (0..n).map(|k| 1e-4 * (1.0 + 0.37 * k as f64)).collect();
        for dl in [0.1, 0.4, 1.6] {
            for j in 0..=4000 {
                let f = j as f64 * 0.01;
                let v = phasor_sum(f, dl, &amps, IfMode::Constant, &fiber, n)?;
                let e = amps[0] * link_factor(f, dl, n, fiber.span_length_km, fiber.dispersion_ps_nm_km);
                worst_fact = worst_fact.max((v - e).abs() / (amps[0] * n as f64));
            }
        }
    }
    // K ratio on a synthetic IF stack
    let df = 0.05;
    let len = 2048;
    let spec = Spectrum::new(len as f64 * df, (0..len).map(|k| 1e-5 / (1.0 + (k as f64 * 0.01).powi(2))).collect());
    let stack = IfStack::new(vec![spec.clone(), spec.clone(), spec.clone(), spec])?;
    let band = DeltaLambdaRange::from_band(-50.0, 32.0, fiber.ref_wavelength_nm)?;
    let mut m = XpmModelConfig::new(fiber, 4, vec![band]);
    m.k_mode = KMode::Incoherent;
    let inc = phase_variance(&m, &stack)?;
    m.k_mode = KMode::Coherent;
    let coh = phase_variance(&m, &stack)?;
    let k_err = rel(inc / coh, 4.0 / PI);
    let passed = worst_eta <= 1e-12 && worst_link <= 1e-9 && worst_fact <= 1e-12 && k_err <= 1e-12;
    outcome(
        passed,
        format!(
            "|eta(0)-1| {worst_eta:.1e}; link(f->0) vs N {worst_link:.1e}; factorization {worst_fact:.1e} (limit 1e-12); K/(4/pi)-1 {k_err:.1e}"
        ),
    )
}

fn c2_q_ratio() -> Res<Outcome> {
    let cap = (4.0 / PI).sqrt();
    let mut worst_zero: f64 = 0.0;
    let mut passed = true;
    let mut parts = Vec::new();
    for (i, n) in [1usize, 2, 5, 20, 50].into_iter().enumerate() {
        let q = q_ratio_c_averaged(n, 256, 1.0, 20_000, 100 + i as u64)?;
        let sigma = q.ci95 / 1.96;
        let ok = q.mean >= 1.0 && q.mean <= cap + 3.0 * sigma;
        passed &= ok;
        parts.push(format!("N={n}: {:.4}+-{:.4}", q.mean, q.ci95));
        let at_zero = q_ratio_monte_carlo(n, 0.0, 1.0, 10_000, 200 + i as u64)?;
        // "within CI" at the same 3 sigma used for the upper bound
        let z = (at_zero.mean - 1.0).abs() / (at_zero.ci95 / 1.96);
        worst_zero = worst_zero.max(z);
        passed &= z <= 3.0;
        if n == 1 {
            passed &= (q.mean - 1.0).abs() <= 3.0 * sigma + 1e-12;
        }
    }
    outcome(
        passed,
        format!(
            "C-averaged Q in [1, {cap:.4}+3sigma]: {}; Q(C=0) vs 1 worst {worst_zero:.2} sigma (limit 3)",
            parts.join(", ")
        ),
    )
}

fn c3_ssfm_checks() -> Res<Outcome> {
    let dir = tmp()?;
    let checks = run_validate(&desk(), dir.path())?;
    let wanted = [
        ("lossless energy conservation (rel/span)", 1e-9),
        ("CW SPM phase vs gamma*P*Leff (rel)", 1e-6),
        ("disperse + compensate EVM", 1e-6),
        ("step-halving change of probe phase variance (rel)", 1e-3),
    ];
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, limit) in wanted {
        let c = checks.iter().find(|c| c.name == name).ok_or_else(|| format!("check {name} missing"))?;
        let ok = c.value.is_finite() && c.value <= limit;
        passed &= ok;
        parts.push(format!("{name} {:.2e} (< {limit:.0e})", c.value));
    }
    outcome(passed, parts.join("; "))
}

/// Closed-form `2γP|∫₀ᴸ e^{(−α+iκ)z} dz|` for a sinusoidal pump intensity of amplitude `p`.
fn walk_off_integral_oracle(f_ghz: f64, dl_nm: f64, p: f64, fiber: &FiberParams) -> f64 {
    let kappa = 2.0 * PI * f_ghz * 1e-3 * fiber.dispersion_ps_nm_km * dl_nm;
    let s = Complex64::new(-fiber.alpha(), kappa);
    let integral = ((s * fiber.span_length_km).exp() - 1.0) / s;
    2.0 * fiber.gamma() * p * integral.norm()
}

/// Exact small-signal phase amplitude of a CW probe after dispersion
/// compensation. Each sideband carries the walk-off mismatch `±κ` plus the
/// common quadratic term `β₂Ω²/2`; the phase is the conjugate-symmetric part.
fn exact_sideband_oracle(f_ghz: f64, dl_nm: f64, p: f64, fiber: &FiberParams) -> f64 {
    let kappa = 2.0 * PI * f_ghz * 1e-3 * fiber.dispersion_ps_nm_km * dl_nm;
    let q = fiber.beta2() * (2.0 * PI * f_ghz * 1e-3).powi(2) / 2.0;
    let s = |k: f64| {
        let s = Complex64::new(-fiber.alpha(), k);
        ((s * fiber.span_length_km).exp() - 1.0) / s
    };
    2.0 * fiber.gamma() * p * (s(kappa + q) + s(-kappa + q).conj()).norm() / 2.0
}

/// Two CW lines at `center ± f/2`: intensity `P0 (1 + cos 2πft)` with no harmonics.
fn two_line_pump(p0: f64, f_ghz: f64, center_ghz: f64, n: usize, fs: f64) -> Res<SampledField> {
    let a = (p0 / 2.0).sqrt();
    let samples: Vec<Complex64> = (0..n)
        .map(|k| {
            let t = k as f64 / fs;
            let phase = PI * f_ghz * t;
            Complex64::from_polar(a, phase) + Complex64::from_polar(a, -phase)
        })
        .collect();
    Ok(SampledField::new(samples, fs)?.with_center_offset(center_ghz))
}

/// Real amplitude of the tone at `f` in a real series.
fn tone(series: &[f64], f_ghz: f64, fs: f64) -> f64 {
    let n = series.len() as f64;
    let acc: Complex64 = series
        .iter()
        .enumerate()
        .map(|(k, x)| Complex64::from_polar(*x, -2.0 * PI * f_ghz * k as f64 / fs))
        .sum();
    2.0 * acc.norm() / n
}

fn c4_small_signal() -> Res<Outcome> {
    let fiber = FiberParams::default();
    let (n, fs) = (1usize << 14, 256.0);
    let (p0, p_probe): (f64, f64) = (1e-3, 1e-4);
    let dl = spacing_to_delta_lambda(50.0, fiber.ref_wavelength_nm);
    let mut passed = true;
    let mut parts = Vec::new();
    let mut oracle_gap: f64 = 0.0;
    let mut exact_gap: f64 = 0.0;
    for f in [1.0, 2.0, 5.0, 10.0, 15.0] {
        let pump = two_line_pump(p0, f, -25.0, n, fs)?;
        let probe = SampledField::new(vec![Complex64::new(p_probe.sqrt(), 0.0); n], fs)?.with_center_offset(25.0);
        let tx = multiplex(&[pump, probe])?;
        let out = ssfm_span(&tx, &fiber, &StepConfig::fixed(0.1))?;
        let rx = chromatic_dispersion_compensate(&out, fiber.dispersion_ps_nm_km * fiber.span_length_km, fiber.ref_wavelength_nm);
        let bb = to_baseband(&bandpass_filter(&rx, 25.0, 32.0)?, 25.0);
        let phase = extract_phase(&bb)?;
        let measured = tone(&phase.samples, f, fs);
        let model = single_tone_phase_amplitude(f, dl, p0, &fiber);
        oracle_gap = oracle_gap.max(rel(model, walk_off_integral_oracle(f, dl, p0, &fiber)));
        exact_gap = exact_gap.max(rel(measured, exact_sideband_oracle(f, dl, p0, &fiber)));
        let e = rel(measured, model);
        passed &= e <= 0.05;
        parts.push(format!("{f} GHz {:.2}%", 100.0 * e));
    }
    passed &= oracle_gap <= 1e-9 && exact_gap <= 0.01;
    outcome(
        passed,
        format!(
            "dl {dl:.4} nm, measured vs model: {} (limit 5%); model vs closed-form integral {oracle_gap:.1e}; measured vs exact sideband theory {:.2}%",
            parts.join(", "),
            100.0 * exact_gap
        ),
    )
}

fn c5_multi_span(desk_report: &mut Option<SpectrumReport>) -> Res<Outcome> {
    let dir = tmp()?;
    let r = run_spectrum(&desk(), dir.path(), "multi-span")?;
    let ev = r.mad(IfMode::Evolving).ok_or("evolving missing")?;
    let co = r.mad(IfMode::Constant).ok_or("constant missing")?;
    let closer = r.evolving_closer_fraction.unwrap_or(f64::NAN);
    let passed = ev <= 1.5 && co > ev;
    *desk_report = Some(r);
    outcome(
        passed,
        format!(
            "MAD evolving {ev:.2} dB (limit 1.5), constant {co:.2} dB; evolving closer in {:.0}% of bands",
            100.0 * closer
        ),
    )
}

fn c6_variance(desk_report: &Option<SpectrumReport>) -> Res<Outcome> {
    let full = std::env::var("XPM_PAPER_PRESET").is_ok_and(|v| v == "1");
    let mut cfg = ExperimentConfig::preset(Preset::Paper);
    if !full {
        cfg.simulation.symbols = 1 << 14;
        cfg.simulation.realizations = 8;
        cfg.simulation.step_km = 0.5;
    }
    let dir = tmp()?;
    let r = run_spectrum(&cfg, dir.path(), "multi-span")?;
    let a = r.variance(IfMode::Evolving).ok_or("evolving missing")?;
    let m = r.measured_variance;
    let gap = rel(a, m);
    let window = |x: f64| (0.8e-3..=1.8e-3).contains(&x);
    let mut passed = gap <= 0.15 && window(a) && window(m);
    let mut detail = format!(
        "{} symbols x {} realizations: analytic {a:.4e}, measured {m:.4e}, gap {:.1}% (limit 15%), window [0.8e-3, 1.8e-3]",
        cfg.simulation.symbols,
        cfg.simulation.realizations,
        100.0 * gap
    );
    let desk = match desk_report {
        Some(r) => r.clone(),
        None => run_spectrum(&desk(), tmp()?.path(), "multi-span")?,
    };
    let da = desk.variance(IfMode::Evolving).ok_or("evolving missing")?;
    let dgap = rel(da, desk.measured_variance);
    passed &= dgap <= 0.15;
    detail.push_str(&format!("; desk: analytic {da:.4e}, measured {:.4e}, gap {:.1}%", desk.measured_variance, 100.0 * dgap));
    outcome(passed, detail)
}

fn sweep(cfg: &ExperimentConfig, parameter: SweepParameter, values: &[f64]) -> Res<Vec<SweepRow>> {
    let mut c = cfg.clone();
    c.sweep = Some(SweepSection { parameter, values: values.to_vec() });
    let dir = tmp()?;
    Ok(run_sweep(&c, dir.path())?)
}

/// Least-squares slope of `y` against `x`.
fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn c7_power_law() -> Res<Outcome> {
    let powers = [-5.0, -2.5, 0.0, 2.5, 5.0];
    let rows = sweep(&desk(), SweepParameter::Power, &powers)?;
    let lp: Vec<f64> = powers.iter().map(|p| p / 10.0).collect();
    let la: Vec<f64> = rows.iter().map(|r| r.analytic(IfMode::Evolving).unwrap_or(f64::NAN).log10()).collect();
    let lm: Vec<f64> = rows.iter().map(|r| r.measured.log10()).collect();
    let (sa, sm) = (slope(&lp, &la), slope(&lp, &lm));
    let passed = (sa - 2.0).abs() <= 0.05 && (sm - 2.0).abs() <= 0.1;
    outcome(passed, format!("slope analytic {sa:.3} (2 +- 0.05), measured {sm:.3} (2 +- 0.1)"))
}

fn sci(v: &[f64]) -> String {
    let s: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", s.join(" "))
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn c8_trends() -> Res<Outcome> {
    let cfg = desk();
    let spacing = sweep(&cfg, SweepParameter::Spacing, &[50.0, 75.0, 100.0, 150.0, 200.0])?;
    let dispersion = sweep(&cfg, SweepParameter::Dispersion, &[2.0, 4.0, 8.0, 16.0])?;
    let cols = |rows: &[SweepRow]| -> Vec<(&'static str, Vec<f64>)> {
        vec![
            ("measured", rows.iter().map(|r| r.measured).collect()),
            ("evolving", rows.iter().map(|r| r.analytic(IfMode::Evolving).unwrap_or(f64::NAN)).collect()),
            ("constant", rows.iter().map(|r| r.analytic(IfMode::Constant).unwrap_or(f64::NAN)).collect()),
        ]
    };
    let mut passed = true;
    let mut parts = Vec::new();
    for (label, rows) in [("spacing", &spacing), ("dispersion", &dispersion)] {
        for (name, v) in cols(rows) {
            let ok = strictly_decreasing(&v);
            passed &= ok;
            if !ok {
                parts.push(format!("{label}/{name} not decreasing {}", sci(&v)));
            }
        }
    }
    let gap = |r: &SweepRow| rel(r.analytic(IfMode::Evolving).unwrap_or(f64::NAN), r.measured);
    let (g2, g16) = (gap(&dispersion[0]), gap(&dispersion[3]));
    passed &= g16 < g2;
    parts.push(format!(
        "measured vs spacing {}; vs D {}; gap D=2 {:.1}%, D=16 {:.1}%",
        sci(&spacing.iter().map(|r| r.measured).collect::<Vec<_>>()),
        sci(&dispersion.iter().map(|r| r.measured).collect::<Vec<_>>()),
        100.0 * g2,
        100.0 * g16
    ));
    outcome(passed, parts.join("; "))
}

/// Gray-coded square QAM with Gaussian phase and additive noise; returns BER.
fn ber_monte_carlo(order: usize, snr: f64, sigma2: f64, symbols: usize, seed: u64) -> f64 {
    let m = (order as f64).sqrt() as usize;
    let bits_axis = m.trailing_zeros() as usize;
    let es = 2.0 * ((m * m) as f64 - 1.0) / 3.0;
    let noise = Normal::new(0.0, (es / (2.0 * snr)).sqrt()).unwrap();
    let phase = Normal::new(0.0, sigma2.sqrt()).unwrap();
    let level = |i: usize| 2.0 * i as f64 - (m as f64 - 1.0);
    let decide = |x: f64| (((x + m as f64 - 1.0) / 2.0).round().clamp(0.0, (m - 1) as f64)) as usize;
    let gray = |i: usize| i ^ (i >> 1);
    let mut rng = stream_rng(seed, 0);
    let mut errors = 0u64;
    for _ in 0..symbols {
        let (i, q) = (rng.gen_range(0..m), rng.gen_range(0..m));
        let z = Complex64::new(level(i), level(q)) * Complex64::from_polar(1.0, phase.sample(&mut rng))
            + Complex64::new(noise.sample(&mut rng), noise.sample(&mut rng));
        errors += ((gray(i) ^ gray(decide(z.re))).count_ones() + (gray(q) ^ gray(decide(z.im))).count_ones()) as u64;
    }
    errors as f64 / (symbols * 2 * bits_axis) as f64
}

fn ber_desk_config() -> ExperimentConfig {
    let mut cfg = desk();
    cfg.link.num_spans = 10;
    cfg.link.noise_figure_db = Some(5.0);
    cfg.probe.kind = ProbeType::Qam;
    cfg.probe.subcarriers = cfg.pump.subcarriers.clone();
    cfg.probe.power_dbm = -8.0;
    cfg.simulation.realizations = 4;
    cfg.ber = Some(BerSection { powers_dbm: vec![-8.0, -2.0, 2.0, 4.0, 6.0], quadrature_nodes: 64 });
    cfg
}

fn c9_ber() -> Res<Outcome> {
    let mut passed = true;
    let mut parts = Vec::new();
    let cases = [(16usize, 15.0, 2e-3), (16, 16.5, 5e-3), (16, 18.0, 1e-3), (64, 21.0, 5e-4), (64, 23.0, 1e-3)];
    let mut worst: f64 = 0.0;
    for (j, (order, snr_db, s2)) in cases.into_iter().enumerate() {
        let snr = 10f64.powf(snr_db / 10.0);
        let model = ber_phase_noise(&BerQuery::new(order, snr, s2))?;
        if !(1e-4..=1e-2).contains(&model) {
            return Err(format!("oracle case M={order} {snr_db} dB outside [1e-4, 1e-2]: {model:e}").into());
        }
        let bits = (order as f64).log2();
        let symbols = ((3000.0 / (model * bits)) as usize).max(200_000);
        let mc = ber_monte_carlo(order, snr, s2, symbols, 300 + j as u64);
        worst = worst.max(rel(model, mc));
    }
    passed &= worst <= 0.10;
    parts.push(format!("quadrature vs Monte-Carlo worst {:.1}% (limit 10%)", 100.0 * worst));

    let dir = tmp()?;
    let rows = run_ber(&ber_desk_config(), dir.path())?;
    let mut order_ok = true;
    let mut ratios = Vec::new();
    for r in &rows {
        if r.power_dbm > -1.0 {
            order_ok &= r.ber_constant < r.ber_evolving;
        }
        if (1e-4..=1e-2).contains(&r.ber_measured) {
            let ratio = r.ber_evolving / r.ber_measured;
            passed &= (0.5..=2.0).contains(&ratio);
            ratios.push(format!("{:+.0} dBm {ratio:.2}", r.power_dbm));
        }
    }
    passed &= order_ok && !ratios.is_empty();
    parts.push(format!("constant < evolving above -1 dBm: {order_ok}; evolving/measured: {}", ratios.join(", ")));
    outcome(passed, parts.join("; "))
}

fn csv_files(dir: &Path) -> Res<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir)? {
        let p = e?.path();
        if p.extension().is_some_and(|x| x == "csv") {
            out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p)?);
        }
    }
    Ok(out)
}

fn c10_reproducibility() -> Res<Outcome> {
    let mut cfg = desk();
    cfg.link.num_spans = 2;
    cfg.simulation.symbols = 1 << 10;
    cfg.simulation.realizations = 3;
    cfg.q_ratio = Some(QRatioSection { spans: vec![1, 5], c_values: vec![0.0, 1.0], c_points: 32, trials: 10_000 });
    let run = |threads: usize| -> Res<BTreeMap<String, Vec<u8>>> {
        let dir = tmp()?;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
        pool.install(|| -> Res<()> {
            run_spectrum(&cfg, dir.path(), "multi-span")?;
            run_q_ratio(&cfg, dir.path())?;
            Ok(())
        })?;
        csv_files(dir.path())
    };
    let a = run(1)?;
    let b = run(1)?;
    let c = run(3)?;
    let passed = !a.is_empty() && a == b && a == c;
    outcome(passed, format!("{} CSV files byte-identical across reruns and thread counts: {}", a.len(), passed))
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> =
        std::env::var("XPM_ACCEPT_ONLY").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let selected = |k: usize| only.as_ref().is_none_or(|o| o.contains(&k));
    let mut desk_report = None;
    let mut failed = 0;
    let mut ran = 0;
    for k in 1..=10 {
        if !selected(k) {
            continue;
        }
        let started = Instant::now();
        let (title, result) = match k {
            1 => ("analytic identities", c1_identities()),
            2 => ("Q ratio bounds", c2_q_ratio()),
            3 => ("SSFM self-checks", c3_ssfm_checks()),
            4 => ("single-span small-signal tone", c4_small_signal()),
            5 => ("multi-span spectrum deviation", c5_multi_span(&mut desk_report)),
            6 => ("variance magnitude", c6_variance(&desk_report)),
            7 => ("quadratic power law", c7_power_law()),
            8 => ("spacing and dispersion trends", c8_trends()),
            9 => ("BER under phase noise", c9_ber()),
            _ => ("reproducibility", c10_reproducibility()),
        };
        let o = result.unwrap_or_else(|e| Outcome { passed: false, detail: format!("error: {e}") });
        ran += 1;
        if !o.passed {
            failed += 1;
        }
        println!(
            "criterion {k:>2} {}: {title} [{:.0} s] {}",
            if o.passed { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
