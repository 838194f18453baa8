//! Sampled complex envelopes and one-dimensional spectra on DFT grids.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FieldMetadata {
    pub seed: Option<u64>,
    pub symbol_count: usize,
    pub description: String,
    /// Two-sided occupied bandwidth around `center_offset_ghz` (GHz).
    pub occupied_bandwidth_ghz: f64,
}

/// Complex baseband envelope (√W) on a uniform periodic time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    samples: Vec<Complex64>,
    /// Sample rate (GHz, i.e. samples per ns).
    pub sample_rate_ghz: f64,
    /// Offset of this field's content relative to the simulation band center (GHz).
    pub center_offset_ghz: f64,
    pub metadata: FieldMetadata,
}

impl SampledField {
    pub fn new(samples: Vec<Complex64>, sample_rate_ghz: f64) -> Result<Self> {
        if samples.is_empty() || !samples.len().is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "field length {} is not a power of two",
                samples.len()
            )));
        }
        if !(sample_rate_ghz > 0.0 && sample_rate_ghz.is_finite()) {
            return Err(Error::InvalidParameter("sample rate must be > 0".into()));
        }
        Ok(Self { samples, sample_rate_ghz, center_offset_ghz: 0.0, metadata: FieldMetadata::default() })
    }

    pub fn zeros(len: usize, sample_rate_ghz: f64) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); len], sample_rate_ghz)
    }

    pub fn with_center_offset(mut self, offset_ghz: f64) -> Self {
        self.center_offset_ghz = offset_ghz;
        self
    }

    pub fn with_metadata(mut self, metadata: FieldMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Frequency resolution (GHz).
    pub fn df(&self) -> f64 {
        self.sample_rate_ghz / self.len() as f64
    }

    /// Record duration (ns).
    pub fn duration_ns(&self) -> f64 {
        self.len() as f64 / self.sample_rate_ghz
    }

    /// Mean power (W).
    pub fn mean_power(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.len() as f64
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scale(&mut self, g: f64) {
        self.samples.iter_mut().for_each(|z| *z *= g);
    }

    /// Rescales to the given mean power (W).
    pub fn set_launch_power(&mut self, power_w: f64) {
        let p = self.mean_power();
        if p > 0.0 {
            self.scale((power_w / p).sqrt());
        }
    }

    /// Spectrum in FFT order (unnormalized DFT).
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut s = self.samples.clone();
        fourier::fft(&mut s);
        s
    }

    /// Number of whole bins closest to `offset_ghz`.
    pub fn bins_for(&self, offset_ghz: f64) -> i64 {
        (offset_ghz / self.df()).round() as i64
    }

    /// Moves content up by `offset_ghz` (rounded to the grid) and updates the
    /// recorded center offset.
    pub fn shift_frequency(&mut self, offset_ghz: f64) {
        let bins = self.bins_for(offset_ghz);
        fourier::shift_bins(&mut self.samples, bins);
        self.center_offset_ghz += bins as f64 * self.df();
    }

    pub fn all_finite(&self) -> bool {
        self.samples.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn check_finite(&self, stage: &str) -> Result<()> {
        if self.all_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(stage.to_string()))
        }
    }
}

/// Nonnegative values on a two-sided DFT frequency grid, stored in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub sample_rate_ghz: f64,
    pub values: Vec<f64>,
}

impl Spectrum {
    pub fn new(sample_rate_ghz: f64, values: Vec<f64>) -> Self {
        Self { sample_rate_ghz, values }
    }

    pub fn zeros(len: usize, sample_rate_ghz: f64) -> Self {
        Self::new(sample_rate_ghz, vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn df(&self) -> f64 {
        self.sample_rate_ghz / self.len() as f64
    }

    pub fn frequency(&self, k: usize) -> f64 {
        fourier::bin_frequency(k, self.len(), self.sample_rate_ghz)
    }

    pub fn frequencies(&self) -> Vec<f64> {
        fourier::frequencies(self.len(), self.sample_rate_ghz)
    }

    pub fn same_grid(&self, other: &Spectrum) -> bool {
        self.len() == other.len() && (self.sample_rate_ghz - other.sample_rate_ghz).abs() <= 1e-12 * self.sample_rate_ghz
    }

    pub fn check_grid(&self, other: &Spectrum) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{} bins @ {} GHz vs {} bins @ {} GHz",
                self.len(),
                self.sample_rate_ghz,
                other.len(),
                other.sample_rate_ghz
            )))
        }
    }

    /// Sum of squared values, i.e. the variance for per-tone amplitude spectra.
    pub fn power_sum(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Linear interpolation at `|f|` on the positive half of the grid.
    pub fn interpolate(&self, f_ghz: f64) -> f64 {
        let x = f_ghz.abs() / self.df();
        let k = x.floor() as usize;
        let half = self.len() / 2;
        if k >= half {
            return self.values[half];
        }
        let t = x - k as f64;
        self.values[k] * (1.0 - t) + self.values[k + 1] * t
    }
}
