//! Analytic XPM phase-fluctuation model for multi-span links with evolving
//! pump intensity-fluctuation spectra.
//!
//! The phase amplitude per tone at modulation frequency `f` and pump-probe
//! wavelength separation `Δλ` is `2γ L_eff √η_XPM(f, Δλ) |υ'(f, Δλ)|`, where
//! `υ'` is the span phasor sum of per-span RMS IF amplitudes. Pass-band pumps
//! average this over the Nyquist band of each subcarrier, and the variance is
//! the statistical factor K times the power summed over all tones.

mod q_ratio;

pub use q_ratio::{q_ratio_bound, q_ratio_c_averaged, q_ratio_monte_carlo, QEstimate, RAYLEIGH_VARIANCE_RATIO};

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::Spectrum;
use crate::propagation::IfStack;
use crate::units::{spacing_to_delta_lambda, FiberParams, Subcarrier};

/// Threshold on `|sin(π f DΔλ L)|` below which the link factor takes its limit.
const LINK_SINGULARITY: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KMode {
    /// Phases align, K = 1.
    Coherent,
    /// Phases decorrelate, K = 4/π.
    Incoherent,
}

impl KMode {
    pub fn value(&self) -> f64 {
        match self {
            KMode::Coherent => 1.0,
            KMode::Incoherent => 4.0 / PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IfMode {
    /// Every span sees the transmitter IF spectrum.
    Constant,
    /// Span `k` sees the IF spectrum recorded at its input.
    Evolving,
}

/// Wavelength-separation interval `[lower, upper]` (nm) of one subcarrier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaLambdaRange {
    pub lower_nm: f64,
    pub upper_nm: f64,
}

impl DeltaLambdaRange {
    /// Range spanned by a band of width `bandwidth_ghz` centered
    /// `separation_ghz` away from the probe.
    pub fn from_band(separation_ghz: f64, bandwidth_ghz: f64, wavelength_nm: f64) -> Result<Self> {
        let lo = separation_ghz.abs() - bandwidth_ghz / 2.0;
        let hi = separation_ghz.abs() + bandwidth_ghz / 2.0;
        if lo <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "band of {bandwidth_ghz} GHz at {separation_ghz} GHz reaches the probe"
            )));
        }
        Ok(Self {
            lower_nm: spacing_to_delta_lambda(lo, wavelength_nm),
            upper_nm: spacing_to_delta_lambda(hi, wavelength_nm),
        })
    }

    /// Nyquist band (width = symbol rate) of a pump subcarrier, with the pump
    /// channel center `pump_minus_probe_ghz` away from the probe.
    pub fn nyquist(sub: &Subcarrier, pump_minus_probe_ghz: f64, wavelength_nm: f64) -> Result<Self> {
        Self::from_band(pump_minus_probe_ghz + sub.center_offset_ghz, sub.symbol_rate_ghz, wavelength_nm)
    }

    /// Full occupied band `R(1+β)` of a pump subcarrier.
    pub fn full_band(sub: &Subcarrier, pump_minus_probe_ghz: f64, wavelength_nm: f64) -> Result<Self> {
        Self::from_band(pump_minus_probe_ghz + sub.center_offset_ghz, sub.occupied_bandwidth(), wavelength_nm)
    }

    pub fn width(&self) -> f64 {
        self.upper_nm - self.lower_nm
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XpmModelConfig {
    pub fiber: FiberParams,
    pub num_spans: usize,
    pub k_mode: KMode,
    pub if_mode: IfMode,
    pub bands: Vec<DeltaLambdaRange>,
    /// Trapezoid nodes per band.
    pub quadrature_points: usize,
    /// Tones above this frequency are excluded (receiver band); `None` keeps all.
    pub max_frequency_ghz: Option<f64>,
}

impl XpmModelConfig {
    pub fn new(fiber: FiberParams, num_spans: usize, bands: Vec<DeltaLambdaRange>) -> Self {
        Self {
            fiber,
            num_spans,
            k_mode: KMode::Incoherent,
            if_mode: IfMode::Evolving,
            bands,
            quadrature_points: 33,
            max_frequency_ghz: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.fiber.validate()?;
        if self.num_spans == 0 {
            return Err(Error::InvalidParameter("model.num_spans must be >= 1".into()));
        }
        if self.quadrature_points < 2 {
            return Err(Error::InvalidParameter(format!(
                "model.quadrature_points = {} (need >= 2)",
                self.quadrature_points
            )));
        }
        if self.bands.is_empty() {
            return Err(Error::InvalidParameter("model.bands is empty".into()));
        }
        for b in &self.bands {
            if !(b.lower_nm > 0.0 && b.upper_nm > b.lower_nm) {
                return Err(Error::InvalidParameter(format!(
                    "delta-lambda range [{}, {}] nm must satisfy 0 < lower < upper",
                    b.lower_nm, b.upper_nm
                )));
            }
        }
        Ok(())
    }

    /// K actually applied: a single span is always coherent.
    pub fn k(&self) -> f64 {
        if self.num_spans == 1 {
            1.0
        } else {
            self.k_mode.value()
        }
    }
}

/// Walk-off rate `ω D Δλ` in rad/km for `f` in GHz.
#[inline]
fn walk_off(f_ghz: f64, delta_lambda_nm: f64, dispersion: f64) -> f64 {
    2.0 * PI * f_ghz * 1e-3 * dispersion * delta_lambda_nm
}

/// Single-span XPM efficiency η_XPM(f, Δλ).
pub fn xpm_efficiency(f_ghz: f64, delta_lambda_nm: f64, fiber: &FiberParams) -> f64 {
    let alpha = fiber.alpha();
    let l = fiber.span_length_km;
    let kappa = walk_off(f_ghz, delta_lambda_nm, fiber.dispersion_ps_nm_km);
    if kappa == 0.0 {
        return 1.0;
    }
    if alpha * l < 1e-9 {
        // lossless limit: sinc²(κL/2)
        let x = kappa * l / 2.0;
        return (x.sin() / x).powi(2);
    }
    let e = (-alpha * l).exp();
    let s = (kappa * l / 2.0).sin();
    let denom = (-(-alpha * l).exp_m1()).powi(2);
    alpha * alpha / (kappa * kappa + alpha * alpha) * (1.0 + 4.0 * s * s * e / denom)
}

/// Walk-off phase per span `f D Δλ L` in cycles, reduced to `[-1/2, 1/2]`.
///
/// The link factor and the phasor sum are periodic in it, and reducing first
/// keeps both accurate near the peaks at integer cycles.
#[inline]
fn span_cycles(f_ghz: f64, delta_lambda_nm: f64, span_length_km: f64, dispersion: f64) -> f64 {
    let t = f_ghz * 1e-3 * dispersion * delta_lambda_nm * span_length_km;
    t - t.round()
}

/// Periodic link factor `|sin(πNfDΔλL) / sin(πfDΔλL)|`.
pub fn link_factor(f_ghz: f64, delta_lambda_nm: f64, num_spans: usize, span_length_km: f64, dispersion: f64) -> f64 {
    let x = PI * span_cycles(f_ghz, delta_lambda_nm, span_length_km, dispersion);
    let den = x.sin();
    if den.abs() < LINK_SINGULARITY {
        // L'Hôpital: |N cos(Nx) / cos(x)| -> N at multiples of π
        let n = num_spans as f64;
        return (n * (n * x).cos() / x.cos()).abs();
    }
    ((num_spans as f64 * x).sin() / den).abs()
}

/// `|Σ_k a_k e^{−j2πfDΔλL(k−1)}|` over the first `num_spans` amplitudes.
///
/// `amplitudes[k]` is the RMS IF amplitude at the input of span `k+1`. In
/// constant mode every term uses `amplitudes[0]`.
pub fn phasor_sum(f_ghz: f64, delta_lambda_nm: f64, amplitudes: &[f64], mode: IfMode, fiber: &FiberParams, num_spans: usize) -> Result<f64> {
    if amplitudes.len() < num_spans || num_spans == 0 {
        return Err(Error::InvalidParameter(format!(
            "IF stack holds {} spans, model needs {num_spans}",
            amplitudes.len()
        )));
    }
    let u = span_cycles(f_ghz, delta_lambda_nm, fiber.span_length_km, fiber.dispersion_ps_nm_km);
    Ok(phasor_sum_unchecked(u, amplitudes, mode, num_spans))
}

#[inline]
fn phasor_sum_unchecked(cycles: f64, amplitudes: &[f64], mode: IfMode, num_spans: usize) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..num_spans {
        let a = match mode {
            IfMode::Constant => amplitudes[0],
            IfMode::Evolving => amplitudes[k],
        };
        // reduce again so every term is evaluated at a small angle
        let c = cycles * k as f64;
        acc += Complex64::from_polar(a, -2.0 * PI * (c - c.round()));
    }
    acc.norm()
}

/// Single-span phase amplitude `2γ L_eff |P_p(f)| √η_XPM(f, Δλ)` (rad).
pub fn single_tone_phase_amplitude(f_ghz: f64, delta_lambda_nm: f64, pump_if_amplitude: f64, fiber: &FiberParams) -> f64 {
    2.0 * fiber.gamma() * fiber.effective_length() * pump_if_amplitude * xpm_efficiency(f_ghz, delta_lambda_nm, fiber).sqrt()
}

/// Multi-span phase amplitude `2γ L_eff √η_XPM |υ'|` at one Δλ (rad).
pub fn multi_span_phase_amplitude(
    f_ghz: f64,
    delta_lambda_nm: f64,
    amplitudes: &[f64],
    mode: IfMode,
    fiber: &FiberParams,
    num_spans: usize,
) -> Result<f64> {
    let v = phasor_sum(f_ghz, delta_lambda_nm, amplitudes, mode, fiber, num_spans)?;
    Ok(2.0 * fiber.gamma() * fiber.effective_length() * xpm_efficiency(f_ghz, delta_lambda_nm, fiber).sqrt() * v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Measured,
}

/// Phase-fluctuation amplitude per tone (rad) on a two-sided DFT grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpectrum {
    pub spectrum: Spectrum,
    pub provenance: Provenance,
}

impl PhaseSpectrum {
    /// Per-tone power `values²`.
    pub fn psd(&self) -> Vec<f64> {
        self.spectrum.values.iter().map(|v| v * v).collect()
    }

    /// Per-tone power scaled by `k`, the ensemble PSD implied by the model.
    pub fn psd_scaled(&self, k: f64) -> Vec<f64> {
        self.spectrum.values.iter().map(|v| k * v * v).collect()
    }
}

/// Δλ-averaged phase spectrum `σ'(f)` for every bin of the IF grid.
///
/// With several subcarrier bands the average runs over the union of their
/// Δλ intervals. The DC bin is zero.
pub fn passband_phase_spectrum(model: &XpmModelConfig, if_stack: &IfStack) -> Result<PhaseSpectrum> {
    model.validate()?;
    if if_stack.num_spans() < model.num_spans {
        return Err(Error::InvalidParameter(format!(
            "IF stack holds {} spans, model needs {}",
            if_stack.num_spans(),
            model.num_spans
        )));
    }
    let fiber = model.fiber;
    let grid = if_stack.grid();
    let n = grid.len();
    let prefactor = 2.0 * fiber.gamma() * fiber.effective_length();
    let total_width: f64 = model.bands.iter().map(|b| b.width()).sum();
    let q = model.quadrature_points;
    // trapezoid nodes and weights over every band
    let nodes: Vec<(f64, f64)> = model
        .bands
        .iter()
        .flat_map(|b| {
            let h = b.width() / (q - 1) as f64;
            (0..q).map(move |i| {
                let w = if i == 0 || i == q - 1 { h / 2.0 } else { h };
                (b.lower_nm + i as f64 * h, w)
            })
        })
        .collect();
    let spans = model.num_spans;
    let values: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let f = grid.frequency(k).abs();
            if k == 0 || model.max_frequency_ghz.is_some_and(|fm| f > fm) {
                return 0.0;
            }
            let amps: Vec<f64> = if_stack.per_span[..spans].iter().map(|s| s.values[k]).collect();
            let relevant = match model.if_mode {
                IfMode::Constant => amps[0] > 0.0,
                IfMode::Evolving => amps.iter().any(|a| *a > 0.0),
            };
            if !relevant {
                return 0.0;
            }
            let integral: f64 = nodes
                .iter()
                .map(|&(dl, w)| {
                    let u = span_cycles(f, dl, fiber.span_length_km, fiber.dispersion_ps_nm_km);
                    w * xpm_efficiency(f, dl, &fiber).sqrt() * phasor_sum_unchecked(u, &amps, model.if_mode, spans)
                })
                .sum();
            prefactor * integral / total_width
        })
        .collect();
    Ok(PhaseSpectrum { spectrum: Spectrum::new(grid.sample_rate_ghz, values), provenance: Provenance::Analytic })
}

/// Average phase variance `K Σ_f σ'(f)²` (rad²), DC excluded.
pub fn phase_variance(model: &XpmModelConfig, if_stack: &IfStack) -> Result<f64> {
    let s = passband_phase_spectrum(model, if_stack)?;
    Ok(model.k() * s.spectrum.power_sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{effective_length, spacing_to_delta_lambda};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ssmf() -> FiberParams {
        FiberParams::default()
    }

    /// Walk-off integral oracle: |∫₀^L e^{−αz} e^{−iκz} dz|² / L_eff², by
    /// composite Simpson with many nodes.
    fn efficiency_oracle(f: f64, dl: f64, fiber: &FiberParams) -> f64 {
        let alpha = fiber.alpha();
        let kappa = 2.0 * PI * f * 1e-3 * fiber.dispersion_ps_nm_km * dl;
        let n = 200_000;
        let h = fiber.span_length_km / n as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..=n {
            let z = i as f64 * h;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += Complex64::from_polar((-alpha * z).exp(), -kappa * z) * w;
        }
        acc *= h / 3.0;
        acc.norm_sqr() / effective_length(alpha, fiber.span_length_km).powi(2)
    }

    #[test]
    fn efficiency_limits() {
        let fiber = ssmf();
        assert_eq!(xpm_efficiency(0.0, 0.4, &fiber), 1.0);
        // far above the walk-off corner the envelope decays as α²/κ²
        let f = 500.0;
        let kappa = 2.0 * PI * f * 1e-3 * 16.0 * 0.4;
        let eta = xpm_efficiency(f, 0.4, &fiber);
        let ripple_max = 1.0 + 4.0 * (-fiber.alpha() * 80.0).exp() / (1.0 - (-fiber.alpha() * 80.0).exp()).powi(2);
        assert!(eta <= fiber.alpha().powi(2) / kappa.powi(2) * ripple_max);
        let lossless = FiberParams { alpha_db_per_km: 0.0, ..fiber };
        assert_eq!(xpm_efficiency(0.0, 0.4, &lossless), 1.0);
    }

    #[test]
    fn efficiency_matches_integral_oracle() {
        let fiber = ssmf();
        for (f, dl) in [(5.0, 0.4), (0.3, 0.4), (1.0, 0.2), (12.0, 0.8)] {
            let oracle = efficiency_oracle(f, dl, &fiber);
            assert_relative_eq!(xpm_efficiency(f, dl, &fiber), oracle, max_relative = 1e-9);
        }
        let lossless = FiberParams { alpha_db_per_km: 0.0, ..fiber };
        assert_relative_eq!(xpm_efficiency(2.0, 0.4, &lossless), efficiency_oracle(2.0, 0.4, &lossless), max_relative = 1e-9);
    }

    #[test]
    fn link_factor_examples() {
        let (d, l) = (16.0, 80.0);
        let dl = 0.4;
        assert_relative_eq!(link_factor(0.0, dl, 7, l, d), 7.0);
        assert_relative_eq!(link_factor(1e-9, dl, 7, l, d), 7.0, max_relative = 1e-9);
        let period = 1.0 / (1e-3 * d * dl * l);
        for m in 1..4 {
            assert_relative_eq!(link_factor(m as f64 * period, dl, 7, l, d), 7.0, max_relative = 1e-6);
        }
        let null = period / 7.0;
        assert!(link_factor(null, dl, 7, l, d) < 1e-9);
        assert_relative_eq!(link_factor(0.37, dl, 1, l, d), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn constant_phasor_factorizes() {
        let fiber = ssmf();
        let amps = [2.5e-5, 9.0, 9.0];
        let dl = 0.4006;
        let period = 1.0 / (1e-3 * 16.0 * dl * 80.0);
        let mut fs: Vec<f64> = (0..400).map(|i| i as f64 * 0.05).collect();
        fs.extend([period, 2.0 * period, period / 3.0]);
        for f in fs {
            let v = phasor_sum(f, dl, &amps, IfMode::Constant, &fiber, 3).unwrap();
            let expect = amps[0] * link_factor(f, dl, 3, 80.0, 16.0);
            assert!((v - expect).abs() <= 1e-12 * expect.max(amps[0]), "f={f}: {v} vs {expect}");
        }
    }

    #[test]
    fn phasor_sum_basics() {
        let fiber = ssmf();
        assert_eq!(phasor_sum(3.0, 0.4, &[1.5], IfMode::Evolving, &fiber, 1).unwrap(), 1.5);
        assert!(phasor_sum(3.0, 0.4, &[1.5], IfMode::Evolving, &fiber, 2).is_err());
        // growth fills the constant-mode null
        let dl = 0.4;
        let null = 1.0 / (1e-3 * 16.0 * dl * 80.0 * 5.0);
        let growing = [1.0, 1.2, 1.4, 1.6, 1.8];
        assert!(phasor_sum(null, dl, &growing, IfMode::Constant, &fiber, 5).unwrap() < 1e-12);
        assert!(phasor_sum(null, dl, &growing, IfMode::Evolving, &fiber, 5).unwrap() > 0.1);
    }

    #[test]
    fn single_tone_amplitude() {
        let fiber = ssmf();
        assert_eq!(single_tone_phase_amplitude(2.0, 0.4, 0.0, &fiber), 0.0);
        let a = single_tone_phase_amplitude(2.0, 0.4, 1e-4, &fiber);
        assert_relative_eq!(single_tone_phase_amplitude(2.0, 0.4, 2e-4, &fiber), 2.0 * a, max_relative = 1e-14);
        let expect = 2.0 * fiber.gamma() * fiber.effective_length() * 1e-4 * xpm_efficiency(2.0, 0.4, &fiber).sqrt();
        assert_relative_eq!(a, expect, max_relative = 1e-14);
    }

    fn stack(spans: usize, growth: f64) -> IfStack {
        let n = 256;
        let per_span = (0..spans)
            .map(|k| {
                let g = 1.0 + growth * k as f64;
                let values = (0..n)
                    .map(|i| {
                        let f = crate::fourier::bin_frequency(i, n, 64.0).abs();
                        if i == 0 || f > 20.0 { 0.0 } else { g * 1e-5 * (1.0 - f / 20.0) }
                    })
                    .collect();
                Spectrum::new(64.0, values)
            })
            .collect();
        IfStack::new(per_span).unwrap()
    }

    fn model(spans: usize) -> XpmModelConfig {
        let dl = DeltaLambdaRange::from_band(50.0, 32.0, 1550.0).unwrap();
        XpmModelConfig::new(ssmf(), spans, vec![dl])
    }

    #[test]
    fn model_validation() {
        let mut m = model(2);
        m.quadrature_points = 1;
        assert!(m.validate().is_err());
        let mut m = model(2);
        m.bands = vec![DeltaLambdaRange { lower_nm: 0.5, upper_nm: 0.3 }];
        assert!(m.validate().is_err());
        assert!(DeltaLambdaRange::from_band(10.0, 32.0, 1550.0).is_err());
        assert_eq!(model(1).k(), 1.0);
        assert_relative_eq!(model(2).k(), 4.0 / PI);
    }

    #[test]
    fn degenerate_range_is_single_tone() {
        let fiber = ssmf();
        let dl = spacing_to_delta_lambda(50.0, 1550.0);
        let mut m = model(1);
        m.bands = vec![DeltaLambdaRange { lower_nm: dl, upper_nm: dl * (1.0 + 1e-10) }];
        let st = stack(1, 0.0);
        let s = passband_phase_spectrum(&m, &st).unwrap();
        for k in [1usize, 17, 60] {
            let f = st.grid().frequency(k);
            let expect = single_tone_phase_amplitude(f, dl, st.per_span[0].values[k], &fiber);
            assert_relative_eq!(s.spectrum.values[k], expect, max_relative = 1e-8);
        }
        assert_eq!(s.spectrum.values[0], 0.0);
    }

    #[test]
    fn variance_properties() {
        let m = model(4);
        let st = stack(4, 0.3);
        let zero = st.scaled(0.0);
        assert_eq!(phase_variance(&m, &zero).unwrap(), 0.0);
        let v = phase_variance(&m, &st).unwrap();
        assert_relative_eq!(phase_variance(&m, &st.scaled(3.0)).unwrap(), 9.0 * v, max_relative = 1e-12);
        let mut coherent = m.clone();
        coherent.k_mode = KMode::Coherent;
        assert_relative_eq!(v / phase_variance(&coherent, &st).unwrap(), 4.0 / PI, max_relative = 1e-14);
        let mut constant = m.clone();
        constant.if_mode = IfMode::Constant;
        assert!(v >= phase_variance(&constant, &st).unwrap());
        // N = 1: both modes agree
        let one = model(1);
        let mut one_c = one.clone();
        one_c.if_mode = IfMode::Constant;
        assert_eq!(phase_variance(&one, &st).unwrap(), phase_variance(&one_c, &st).unwrap());
    }

    #[test]
    fn band_limited_variance() {
        let mut m = model(3);
        let st = stack(3, 0.2);
        let full = phase_variance(&m, &st).unwrap();
        m.max_frequency_ghz = Some(5.0);
        let part = phase_variance(&m, &st).unwrap();
        assert!(part < full && part > 0.0);
    }

    proptest! {
        #[test]
        fn efficiency_envelope_decreasing(f1 in 2.0f64..50.0, df in 0.01f64..20.0, dl in 0.1f64..1.6) {
            let fiber = ssmf();
            let alpha = fiber.alpha();
            let env = |f: f64| {
                let k = 2.0 * PI * f * 1e-3 * 16.0 * dl;
                alpha * alpha / (k * k + alpha * alpha)
            };
            prop_assert!(env(f1 + df) < env(f1));
        }

        #[test]
        fn evolving_dominates_constant(g in proptest::collection::vec(0.0f64..2.0, 4)) {
            let base = stack(5, 0.0);
            let mut per_span = base.per_span.clone();
            for (k, extra) in g.iter().enumerate() {
                per_span[k + 1].values.iter_mut().for_each(|v| *v *= 1.0 + extra);
            }
            let st = IfStack::new(per_span).unwrap();
            let m = model(5);
            let mut c = m.clone();
            c.if_mode = IfMode::Constant;
            prop_assert!(phase_variance(&m, &st).unwrap() >= phase_variance(&c, &st).unwrap() * (1.0 - 1e-12));
        }

        #[test]
        fn constant_mode_matches_factorization(f in 0.0f64..40.0, n in 1usize..12) {
            let fiber = ssmf();
            let amps = vec![3.0e-5; n];
            let v = phasor_sum(f, 0.4, &amps, IfMode::Constant, &fiber, n).unwrap();
            let e = amps[0] * link_factor(f, 0.4, n, 80.0, 16.0);
            prop_assert!((v - e).abs() <= 1e-12 * (n as f64) * amps[0]);
        }
    }
}
