//! Receiver-side measurements on the probe: phase series, phase PSD, phase
//! variance, EVM and the radial SNR split.

use num_complex::Complex64;

use crate::analytic::{PhaseSpectrum, Provenance};
use crate::error::{Error, Result};
use crate::field::{SampledField, Spectrum};
use crate::fourier;
use crate::signal::ConstellationSpec;

/// Samples whose magnitude falls below this fraction of the RMS count as gaps.
const GAP_FRACTION: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSeries {
    pub samples: Vec<f64>,
    pub sample_rate_ghz: f64,
    pub mean_removed: bool,
}

impl PhaseSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Subtracts the time average.
    pub fn remove_mean(&mut self) {
        let m = self.samples.iter().sum::<f64>() / self.samples.len() as f64;
        self.samples.iter_mut().for_each(|p| *p -= m);
        self.mean_removed = true;
    }
}

/// Unwrapped, mean-removed phase of the probe envelope.
pub fn extract_phase(field: &SampledField) -> Result<PhaseSeries> {
    let rms = field.mean_power().sqrt();
    let gaps = field.samples().iter().filter(|z| !(z.norm() > GAP_FRACTION * rms)).count();
    if gaps > 0 {
        return Err(Error::ZeroAmplitude(gaps));
    }
    let mut samples = Vec::with_capacity(field.len());
    let mut prev = 0.0;
    let mut offset = 0.0;
    for (i, z) in field.samples().iter().enumerate() {
        let p = z.arg();
        if i > 0 {
            let d = p - prev;
            if d > std::f64::consts::PI {
                offset -= 2.0 * std::f64::consts::PI;
            } else if d < -std::f64::consts::PI {
                offset += 2.0 * std::f64::consts::PI;
            }
        }
        prev = p;
        samples.push(p + offset);
    }
    let mut series = PhaseSeries { samples, sample_rate_ghz: field.sample_rate_ghz, mean_removed: false };
    series.remove_mean();
    Ok(series)
}

fn check_set(series: &[PhaseSeries]) -> Result<()> {
    let first = series
        .first()
        .ok_or_else(|| Error::InvalidParameter("phase measurement needs at least one realization".into()))?;
    for s in series {
        if s.len() != first.len() || s.sample_rate_ghz != first.sample_rate_ghz {
            return Err(Error::GridMismatch(format!(
                "phase series of {} samples at {} GHz vs {} at {} GHz",
                s.len(),
                s.sample_rate_ghz,
                first.len(),
                first.sample_rate_ghz
            )));
        }
    }
    Ok(())
}

/// Power-averaged periodogram, reported as RMS amplitude per tone
/// (`|DFT|/n`, same normalization as the intensity-fluctuation spectrum).
pub fn phase_psd(series: &[PhaseSeries]) -> Result<PhaseSpectrum> {
    check_set(series)?;
    let n = series[0].len();
    let mut power = vec![0.0; n];
    for s in series {
        let mut buf: Vec<Complex64> = s.samples.iter().map(|p| Complex64::new(*p, 0.0)).collect();
        fourier::fft(&mut buf);
        for (acc, z) in power.iter_mut().zip(&buf) {
            *acc += z.norm_sqr() / (n * n) as f64;
        }
    }
    let r = series.len() as f64;
    let values = power.into_iter().map(|p| (p / r).sqrt()).collect();
    Ok(PhaseSpectrum {
        spectrum: Spectrum::new(series[0].sample_rate_ghz, values),
        provenance: Provenance::Measured,
    })
}

/// Ensemble and time average of φ² (rad²).
pub fn phase_variance_measured(series: &[PhaseSeries]) -> Result<f64> {
    check_set(series)?;
    let total: f64 = series.iter().map(|s| s.samples.iter().map(|p| p * p).sum::<f64>() / s.len() as f64).sum();
    Ok(total / series.len() as f64)
}

/// Peak amplitude of a real tone at `f_ghz`, summing the two sidebands.
pub fn tone_amplitude(spectrum: &Spectrum, f_ghz: f64) -> f64 {
    let n = spectrum.len();
    let k = (f_ghz / spectrum.df()).round() as i64;
    let pos = k.rem_euclid(n as i64) as usize;
    let neg = (-k).rem_euclid(n as i64) as usize;
    spectrum.values[pos] + spectrum.values[neg]
}

#[derive(Debug, Clone, Copy)]
pub enum EvmReference<'a> {
    /// Minimum-distance decisions serve as reference.
    Decided,
    /// Transmitted symbols.
    Known(&'a [Complex64]),
}

/// RMS error vector magnitude relative to the reference RMS.
pub fn evm(rx: &[Complex64], constellation: &ConstellationSpec, reference: EvmReference) -> Result<f64> {
    if rx.is_empty() {
        return Err(Error::InvalidParameter("EVM of an empty symbol set".into()));
    }
    let (mut err, mut refp) = (0.0, 0.0);
    match reference {
        EvmReference::Decided => {
            for z in rx {
                let (i, q) = constellation.decide(*z);
                let r = constellation.point(i, q);
                err += (z - r).norm_sqr();
                refp += r.norm_sqr();
            }
        }
        EvmReference::Known(tx) => {
            if tx.len() != rx.len() {
                return Err(Error::InvalidParameter(format!("{} received vs {} reference symbols", rx.len(), tx.len())));
            }
            for (z, r) in rx.iter().zip(tx) {
                err += (z - r).norm_sqr();
                refp += r.norm_sqr();
            }
        }
    }
    Ok((err / refp).sqrt())
}

/// `SNR_total = 1/EVM²`.
pub fn snr_from_evm(evm_rms: f64) -> f64 {
    1.0 / (evm_rms * evm_rms)
}

/// Radial SNR after removing the phase-noise share: `1/SNR_rad = 1/SNR − σ²`.
pub fn radial_snr(snr_total: f64, sigma2_phase: f64) -> Result<f64> {
    if !(snr_total > 0.0) || sigma2_phase < 0.0 {
        return Err(Error::InvalidParameter(format!("radial SNR needs snr > 0 and sigma2 >= 0 ({snr_total}, {sigma2_phase})")));
    }
    let budget = 1.0 / snr_total - sigma2_phase;
    if budget <= 1e-15 / snr_total {
        return Err(Error::PhaseLimited(budget));
    }
    Ok(1.0 / budget)
}
