use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::SampledField;
use crate::fourier;
use crate::units::{dispersion_to_beta2, ghz_to_rad_per_ps};

/// Undoes accumulated dispersion `accumulated_dl_ps_nm` (D·L in ps/nm) by
/// applying `exp(−i β₂,acc ω² / 2)` across the whole band.
pub fn chromatic_dispersion_compensate(field: &SampledField, accumulated_dl_ps_nm: f64, wavelength_nm: f64) -> SampledField {
    let mut out = field.clone();
    if accumulated_dl_ps_nm == 0.0 {
        return out;
    }
    // β₂ for a unit length carrying the whole accumulated D·L
    let beta2_acc = dispersion_to_beta2(accumulated_dl_ps_nm, wavelength_nm);
    let n = out.len();
    let fs = out.sample_rate_ghz;
    let buf = out.samples_mut();
    fourier::fft(buf);
    for (k, z) in buf.iter_mut().enumerate() {
        let w = ghz_to_rad_per_ps(fourier::bin_frequency(k, n, fs));
        *z *= Complex64::from_polar(1.0, -beta2_acc * w * w / 2.0);
    }
    fourier::ifft(buf);
    out
}

/// Ideal brick-wall band-pass: bins farther than `bandwidth/2` from
/// `center_offset_ghz` are set to exactly zero.
pub fn bandpass_filter(field: &SampledField, center_offset_ghz: f64, bandwidth_ghz: f64) -> Result<SampledField> {
    let nyq = field.sample_rate_ghz / 2.0;
    if !(bandwidth_ghz > 0.0) || center_offset_ghz - bandwidth_ghz / 2.0 < -nyq - 1e-9 || center_offset_ghz + bandwidth_ghz / 2.0 > nyq + 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "band {center_offset_ghz} ± {} GHz exceeds the ±{nyq} GHz grid",
            bandwidth_ghz / 2.0
        )));
    }
    let mut out = field.clone();
    let n = out.len();
    let fs = out.sample_rate_ghz;
    let half = bandwidth_ghz / 2.0 + 1e-9 * fs;
    let buf = out.samples_mut();
    fourier::fft(buf);
    for (k, z) in buf.iter_mut().enumerate() {
        if (fourier::bin_frequency(k, n, fs) - center_offset_ghz).abs() > half {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    fourier::ifft(buf);
    out.metadata.occupied_bandwidth_ghz = out.metadata.occupied_bandwidth_ghz.min(bandwidth_ghz);
    Ok(out)
}

/// Moves content at `offset_ghz` to zero frequency.
pub fn to_baseband(field: &SampledField, offset_ghz: f64) -> SampledField {
    let mut out = field.clone();
    out.shift_frequency(-offset_ghz);
    out.center_offset_ghz = 0.0;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::{ssfm_span, StepConfig};
    use crate::signal::{cw_probe, generate_qam_symbols, qam_channel, rrc_filter, rrc_shape, ConstellationSpec};
    use crate::units::{FiberParams, Subcarrier};

    fn rms_diff(a: &SampledField, b: &SampledField) -> f64 {
        let num: f64 = a.samples().iter().zip(b.samples()).map(|(x, y)| (x - y).norm_sqr()).sum();
        (num / b.energy()).sqrt()
    }

    #[test]
    fn zero_dispersion_is_identity() {
        let f = cw_probe(1e-3, 64, 64.0).unwrap();
        assert_eq!(chromatic_dispersion_compensate(&f, 0.0, 1550.0), f);
    }

    #[test]
    fn disperse_then_compensate() {
        let spec = ConstellationSpec::new(16).unwrap();
        let seq = generate_qam_symbols(spec, 1024, 5).unwrap();
        let tx = rrc_shape(&seq.symbols, 32.0, 0.05, 4).unwrap();
        let fiber = FiberParams { alpha_db_per_km: 0.0, n2: 0.0, ..FiberParams::default() };
        let rx = ssfm_span(&tx, &fiber, &StepConfig::fixed(8.0)).unwrap();
        assert!(rms_diff(&rx, &tx) > 0.1);
        let cdc = chromatic_dispersion_compensate(&rx, fiber.dispersion_ps_nm_km * fiber.span_length_km, 1550.0);
        assert!(rms_diff(&cdc, &tx) < 1e-10);
        let mf = rrc_filter(&cdc, 32.0, 0.05);
        let evm2: f64 = seq.symbols.iter().enumerate().map(|(m, s)| (mf.samples()[4 * m] - s).norm_sqr()).sum::<f64>()
            / seq.symbols.len() as f64;
        assert!(evm2.sqrt() < 1e-6);
    }

    #[test]
    fn group_delay_slope() {
        // phase slope of the compensator: τ(f) = dφ/dω; across the band its
        // slope per nm must equal −D·L = −1280 ps/nm
        let n = 1 << 12;
        let fs = 256.0;
        let mut imp = SampledField::zeros(n, fs).unwrap();
        imp.samples_mut()[0] = Complex64::new(1.0, 0.0);
        let out = chromatic_dispersion_compensate(&imp, 16.0 * 80.0, 1550.0);
        let s = out.spectrum();
        let k1 = 100usize;
        let k2 = 300usize;
        let delay = |k: usize| {
            let dphi = (s[k + 1] / s[k]).arg();
            let dw = ghz_to_rad_per_ps(fs / n as f64);
            dphi / dw
        };
        let f1 = fourier::bin_frequency(k1, n, fs);
        let f2 = fourier::bin_frequency(k2, n, fs);
        let dl = crate::units::spacing_to_delta_lambda(f2 - f1, 1550.0);
        // higher frequency is shorter wavelength: dτ/dλ = −(τ2 − τ1)/Δλ
        let slope = -(delay(k2) - delay(k1)) / dl;
        assert!((slope - (-1280.0)).abs() / 1280.0 < 1e-3, "{slope}");
    }

    #[test]
    fn brick_wall_filter() {
        let fs = 256.0;
        let n = 1 << 14;
        let df = fs / n as f64;
        let snap = |x: f64| (x / df).round() * df;
        let pump = [Subcarrier { symbol_rate_ghz: 32.0, rolloff: 0.05, center_offset_ghz: 0.0, qam_order: 16 }];
        let ch = qam_channel(&pump, snap(-25.0), 1e-3, n, fs, 1, 0).unwrap();
        let probe = cw_probe(1e-5, n, fs).unwrap().with_center_offset(snap(25.0));
        let both = crate::signal::multiplex(&[ch.field, probe]).unwrap();
        let full = bandpass_filter(&both, 0.0, fs).unwrap();
        let d: f64 = full.samples().iter().zip(both.samples()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(d < 1e-12);
        let out = bandpass_filter(&both, snap(25.0), 12.0).unwrap();
        let spec = out.spectrum();
        for (k, z) in spec.iter().enumerate() {
            let f = fourier::bin_frequency(k, n, fs);
            if (f - snap(25.0)).abs() > 6.0 + 1e-6 {
                assert!(z.norm() < 1e-12, "leak at {f}");
            }
        }
        assert!((out.mean_power() - 1e-5).abs() < 1e-12);
        assert!(bandpass_filter(&both, 120.0, 20.0).is_err());
    }

    #[test]
    fn tone_passes_unchanged() {
        let f = cw_probe(1e-3, 256, 64.0).unwrap();
        let out = bandpass_filter(&f, 0.0, 1.0).unwrap();
        for (a, b) in out.samples().iter().zip(f.samples()) {
            assert!((a - b).norm() < 1e-15);
        }
    }
}
