use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use super::receiver::bandpass_filter;
use super::ssfm::{ssfm_span, StepConfig};
use crate::error::{Error, Result};
use crate::field::{SampledField, Spectrum};
use crate::fourier;
use crate::signal::stream_rng;
use crate::units::{db_to_linear, photon_energy, LinkConfig};

/// Random stream offset reserved for amplifier noise.
const ASE_STREAM: u64 = 1 << 20;

/// ASE power spectral density (W/Hz) of one amplifier, `(NF·G − 1)·hν/2`.
pub fn ase_psd(gain_db: f64, noise_figure_db: f64) -> f64 {
    let g = db_to_linear(gain_db);
    let nf = db_to_linear(noise_figure_db);
    ((nf * g - 1.0) * photon_energy() / 2.0).max(0.0)
}

/// Flat-gain amplifier. White complex Gaussian ASE over the whole simulation
/// band is added when `noise_figure_db` is set.
pub fn amplify(field: &SampledField, gain_db: f64, noise_figure_db: Option<f64>, seed: u64) -> Result<SampledField> {
    amplify_stream(field, gain_db, noise_figure_db, seed, ASE_STREAM)
}

fn amplify_stream(field: &SampledField, gain_db: f64, noise_figure_db: Option<f64>, seed: u64, stream: u64) -> Result<SampledField> {
    if !(gain_db >= 0.0) {
        return Err(Error::InvalidParameter(format!("amplifier gain {gain_db} dB must be >= 0")));
    }
    let mut out = field.clone();
    out.scale(10f64.powf(gain_db / 20.0));
    if let Some(nf) = noise_figure_db {
        let noise_power = ase_psd(gain_db, nf) * field.sample_rate_ghz * 1e9;
        let sigma = (noise_power / 2.0).sqrt();
        let mut rng = stream_rng(seed, stream);
        for z in out.samples_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *z += Complex64::new(sigma * re, sigma * im);
        }
    }
    Ok(out)
}

/// Two-sided magnitude spectrum of the intensity fluctuation `|E|² − ⟨|E|²⟩`,
/// normalized by the sample count (W per tone). The DC bin is zero.
pub fn intensity_fluctuation_spectrum(field: &SampledField) -> Spectrum {
    let n = field.len();
    let mean = field.mean_power();
    let mut buf: Vec<Complex64> = field.samples().iter().map(|z| Complex64::new(z.norm_sqr() - mean, 0.0)).collect();
    fourier::fft(&mut buf);
    let mut values: Vec<f64> = buf.iter().map(|z| z.norm() / n as f64).collect();
    values[0] = 0.0;
    Spectrum::new(field.sample_rate_ghz, values)
}

/// Brick-wall selection of the pump channel used for IF taps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpTap {
    pub center_offset_ghz: f64,
    pub bandwidth_ghz: f64,
}

impl PumpTap {
    /// Pump occupied bandwidth plus a 2 GHz guard.
    pub fn for_pump(center_offset_ghz: f64, occupied_bandwidth_ghz: f64) -> Self {
        Self { center_offset_ghz, bandwidth_ghz: occupied_bandwidth_ghz + 2.0 }
    }

    pub fn spectrum(&self, field: &SampledField) -> Result<Spectrum> {
        let pump = bandpass_filter(field, self.center_offset_ghz, self.bandwidth_ghz)?;
        Ok(intensity_fluctuation_spectrum(&pump))
    }
}

/// Per-span pump IF magnitude spectra `|P_p^(k)(f)|`, k = 1..N, on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IfStack {
    pub per_span: Vec<Spectrum>,
}

impl IfStack {
    pub fn new(per_span: Vec<Spectrum>) -> Result<Self> {
        let first = per_span.first().ok_or_else(|| Error::InvalidParameter("IF stack needs at least one span".into()))?;
        for s in &per_span[1..] {
            first.check_grid(s)?;
        }
        let mut per_span = per_span;
        per_span.iter_mut().for_each(|s| s.values[0] = 0.0);
        Ok(Self { per_span })
    }

    pub fn num_spans(&self) -> usize {
        self.per_span.len()
    }

    pub fn grid(&self) -> &Spectrum {
        &self.per_span[0]
    }

    pub fn len(&self) -> usize {
        self.grid().len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid().is_empty()
    }

    pub fn sample_rate_ghz(&self) -> f64 {
        self.grid().sample_rate_ghz
    }

    /// RMS combination across realizations: `sqrt(mean |P^(k)|²)` per bin.
    pub fn ensemble(stacks: &[IfStack]) -> Result<IfStack> {
        let first = stacks.first().ok_or_else(|| Error::InvalidParameter("empty ensemble".into()))?;
        let n_spans = first.num_spans();
        for s in stacks {
            if s.num_spans() != n_spans {
                return Err(Error::GridMismatch("ensemble members differ in span count".into()));
            }
            first.grid().check_grid(s.grid())?;
        }
        let count = stacks.len() as f64;
        let per_span = (0..n_spans)
            .map(|k| {
                let mut acc = vec![0.0; first.len()];
                for s in stacks {
                    acc.iter_mut().zip(&s.per_span[k].values).for_each(|(a, v)| *a += v * v);
                }
                Spectrum::new(first.sample_rate_ghz(), acc.into_iter().map(|a| (a / count).sqrt()).collect())
            })
            .collect();
        IfStack::new(per_span)
    }

    /// Every span replaced by span 1 (transmitter) spectrum.
    pub fn constant(&self) -> IfStack {
        IfStack { per_span: vec![self.per_span[0].clone(); self.num_spans()] }
    }

    /// First `n` spans.
    pub fn truncated(&self, n: usize) -> IfStack {
        IfStack { per_span: self.per_span[..n.min(self.num_spans())].to_vec() }
    }

    pub fn scaled(&self, g: f64) -> IfStack {
        IfStack {
            per_span: self
                .per_span
                .iter()
                .map(|s| Spectrum::new(s.sample_rate_ghz, s.values.iter().map(|v| v * g).collect()))
                .collect(),
        }
    }

    /// Mean IF power of span `k` (0-based) over bins with `lo <= |f| < hi`.
    pub fn band_power(&self, k: usize, lo_ghz: f64, hi_ghz: f64) -> f64 {
        let s = &self.per_span[k];
        let (mut acc, mut count) = (0.0, 0usize);
        for (i, v) in s.values.iter().enumerate() {
            let f = s.frequency(i).abs();
            if f >= lo_ghz && f < hi_ghz && i != 0 {
                acc += v * v;
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            acc / count as f64
        }
    }
}

/// Propagates through all spans of `link`, recording the pump IF spectrum at
/// the input of every span (span 1 is the transmitter).
///
/// Amplifier noise of span `k` uses stream `k` of `seed`. No dispersion
/// compensation is applied here.
pub fn propagate_link(
    field: &SampledField,
    link: &LinkConfig,
    step: &StepConfig,
    tap: &PumpTap,
    seed: u64,
) -> Result<(SampledField, IfStack)> {
    link.validate()?;
    let mut current = field.clone();
    let mut taps = Vec::with_capacity(link.num_spans);
    for k in 0..link.num_spans {
        taps.push(tap.spectrum(&current)?);
        let after = ssfm_span(&current, &link.fiber, step)?;
        current = amplify_stream(&after, link.amp_gain_db, link.amp_noise_figure_db, seed, ASE_STREAM + k as u64)?;
        current.check_finite("amplifier")?;
    }
    Ok((current, IfStack::new(taps)?))
}
