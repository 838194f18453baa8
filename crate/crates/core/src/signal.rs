//! Seedable generation of pump and probe fields: square M-QAM symbols with
//! per-axis Gray mapping, root-raised-cosine shaping on the periodic grid,
//! CW probes, and multiplexing of channels into one simulation band.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{FieldMetadata, SampledField};
use crate::fourier;
use crate::units::Subcarrier;

/// Builds the generator for one named stream of a realization.
///
/// Every random draw in the crate goes through here so that a run is a pure
/// function of `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Square M-QAM with unit average symbol energy and per-axis Gray code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstellationSpec {
    pub order: usize,
    /// Levels per axis, √M.
    pub side: usize,
    /// Multiplier mapping odd-integer levels to unit average energy.
    pub scale: f64,
}

impl ConstellationSpec {
    pub fn new(order: usize) -> Result<Self> {
        if !matches!(order, 4 | 16 | 64 | 256) {
            return Err(Error::UnsupportedQamOrder(order));
        }
        let side = (order as f64).sqrt().round() as usize;
        // mean of |level|² over both axes is 2(M-1)/3
        let scale = (3.0 / (2.0 * (order as f64 - 1.0))).sqrt();
        Ok(Self { order, side, scale })
    }

    pub fn bits_per_axis(&self) -> usize {
        self.side.trailing_zeros() as usize
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis()
    }

    /// Amplitude of level index `i` along one axis.
    pub fn level(&self, i: usize) -> f64 {
        (2.0 * i as f64 - (self.side as f64 - 1.0)) * self.scale
    }

    /// Gray label of level index `i`.
    pub fn gray(&self, i: usize) -> usize {
        i ^ (i >> 1)
    }

    pub fn point(&self, i_idx: usize, q_idx: usize) -> Complex64 {
        Complex64::new(self.level(i_idx), self.level(q_idx))
    }

    /// Nearest level index along one axis.
    pub fn decide_axis(&self, x: f64) -> usize {
        let raw = ((x / self.scale + (self.side as f64 - 1.0)) / 2.0).round();
        raw.clamp(0.0, (self.side - 1) as f64) as usize
    }

    pub fn decide(&self, z: Complex64) -> (usize, usize) {
        (self.decide_axis(z.re), self.decide_axis(z.im))
    }

    /// Decision thresholds along one axis, ascending.
    pub fn thresholds(&self) -> Vec<f64> {
        (1..self.side).map(|i| (2.0 * i as f64 - self.side as f64) * self.scale).collect()
    }

    /// Number of differing bits between the labels of two symbols.
    pub fn bit_errors(&self, tx: (usize, usize), rx: (usize, usize)) -> u32 {
        ((self.gray(tx.0) ^ self.gray(rx.0)).count_ones()) + ((self.gray(tx.1) ^ self.gray(rx.1)).count_ones())
    }
}

/// Symbols with their per-axis level indices, for later bit counting.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSequence {
    pub constellation: ConstellationSpec,
    pub indices: Vec<(usize, usize)>,
    pub symbols: Vec<Complex64>,
}

/// Draws `count` i.i.d. uniform symbols.
pub fn generate_qam_symbols(spec: ConstellationSpec, count: usize, seed: u64) -> Result<SymbolSequence> {
    generate_qam_symbols_with(spec, count, &mut stream_rng(seed, 0))
}

pub fn generate_qam_symbols_with<R: Rng>(spec: ConstellationSpec, count: usize, rng: &mut R) -> Result<SymbolSequence> {
    if count == 0 {
        return Err(Error::InvalidParameter("symbol count must be >= 1".into()));
    }
    let indices: Vec<(usize, usize)> =
        (0..count).map(|_| (rng.gen_range(0..spec.side), rng.gen_range(0..spec.side))).collect();
    let symbols = indices.iter().map(|&(i, q)| spec.point(i, q)).collect();
    Ok(SymbolSequence { constellation: spec, indices, symbols })
}

/// Root-raised-cosine amplitude response, unit passband gain.
pub fn rrc_response(f_ghz: f64, symbol_rate_ghz: f64, rolloff: f64) -> f64 {
    let f = f_ghz.abs();
    let f1 = symbol_rate_ghz * (1.0 - rolloff) / 2.0;
    let f2 = symbol_rate_ghz * (1.0 + rolloff) / 2.0;
    if f <= f1 {
        1.0
    } else if f > f2 {
        0.0
    } else {
        (0.5 * (1.0 + (PI / (rolloff * symbol_rate_ghz) * (f - f1)).cos())).sqrt()
    }
}

/// Shapes symbols with an RRC filter applied on the periodic DFT grid.
///
/// The filter is scaled so that i.i.d. unit-energy symbols produce unit mean
/// power, and so that a matched [`rrc_filter`] pass restores the symbols at
/// sample indices `m * samples_per_symbol`.
pub fn rrc_shape(symbols: &[Complex64], symbol_rate_ghz: f64, rolloff: f64, samples_per_symbol: usize) -> Result<SampledField> {
    if symbols.len() < 32 {
        return Err(Error::InvalidParameter(format!(
            "RRC filter span too short: {} symbols (need >= 32)",
            symbols.len()
        )));
    }
    if !(0.0..=1.0).contains(&rolloff) {
        return Err(Error::InvalidParameter(format!("rolloff {rolloff} outside [0, 1]")));
    }
    if (samples_per_symbol as f64) < 2.0 * (1.0 + rolloff) {
        return Err(Error::InvalidParameter(format!(
            "{samples_per_symbol} samples per symbol is below Nyquist for rolloff {rolloff}"
        )));
    }
    let n = symbols.len() * samples_per_symbol;
    let fs = symbol_rate_ghz * samples_per_symbol as f64;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (m, &s) in symbols.iter().enumerate() {
        buf[m * samples_per_symbol] = s;
    }
    fourier::fft(&mut buf);
    let sps = samples_per_symbol as f64;
    for (k, z) in buf.iter_mut().enumerate() {
        *z *= sps * rrc_response(fourier::bin_frequency(k, n, fs), symbol_rate_ghz, rolloff);
    }
    fourier::ifft(&mut buf);
    let field = SampledField::new(buf, fs)?;
    Ok(field.with_metadata(FieldMetadata {
        seed: None,
        symbol_count: symbols.len(),
        description: format!("RRC {symbol_rate_ghz} GBd beta={rolloff}"),
        occupied_bandwidth_ghz: symbol_rate_ghz * (1.0 + rolloff),
    }))
}

/// Matched RRC filter (unit passband gain) on a baseband field.
pub fn rrc_filter(field: &SampledField, symbol_rate_ghz: f64, rolloff: f64) -> SampledField {
    let mut out = field.clone();
    let n = out.len();
    let fs = out.sample_rate_ghz;
    let s = out.samples_mut();
    fourier::fft(s);
    for (k, z) in s.iter_mut().enumerate() {
        *z *= rrc_response(fourier::bin_frequency(k, n, fs), symbol_rate_ghz, rolloff);
    }
    fourier::ifft(s);
    out
}

/// Constant-envelope probe with zero phase.
pub fn cw_probe(power_w: f64, len: usize, sample_rate_ghz: f64) -> Result<SampledField> {
    if !(power_w > 0.0) {
        return Err(Error::InvalidParameter("CW probe power must be > 0".into()));
    }
    let a = Complex64::new(power_w.sqrt(), 0.0);
    let f = SampledField::new(vec![a; len], sample_rate_ghz)?;
    Ok(f.with_metadata(FieldMetadata {
        seed: None,
        symbol_count: 0,
        description: format!("CW {power_w:e} W"),
        occupied_bandwidth_ghz: 0.0,
    }))
}

/// Frequency-shifted sum of fields, each placed at its `center_offset_ghz`.
///
/// Offsets are rounded to the DFT grid. Fields whose occupied bands overlap
/// are rejected.
pub fn multiplex(fields: &[SampledField]) -> Result<SampledField> {
    let first = fields.first().ok_or_else(|| Error::InvalidParameter("multiplex needs at least one field".into()))?;
    let n = first.len();
    let fs = first.sample_rate_ghz;
    for f in fields {
        if f.len() != n || (f.sample_rate_ghz - fs).abs() > 1e-12 * fs {
            return Err(Error::GridMismatch("multiplexed fields must share length and sample rate".into()));
        }
    }
    for i in 0..fields.len() {
        for j in i + 1..fields.len() {
            let (a, b) = (&fields[i], &fields[j]);
            let gap = (a.center_offset_ghz - b.center_offset_ghz).abs();
            let need = (a.metadata.occupied_bandwidth_ghz + b.metadata.occupied_bandwidth_ghz) / 2.0;
            if gap < need - 1e-9 {
                return Err(Error::SpectralOverlap(i, j));
            }
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for f in fields {
        let mut shifted = f.samples().to_vec();
        let bins = f.bins_for(f.center_offset_ghz);
        fourier::shift_bins(&mut shifted, bins);
        out.iter_mut().zip(&shifted).for_each(|(o, s)| *o += s);
        let c = bins as f64 * f.df();
        lo = lo.min(c - f.metadata.occupied_bandwidth_ghz / 2.0);
        hi = hi.max(c + f.metadata.occupied_bandwidth_ghz / 2.0);
    }
    let mut field = SampledField::new(out, fs)?;
    field.metadata = FieldMetadata {
        seed: first.metadata.seed,
        symbol_count: fields.iter().map(|f| f.metadata.symbol_count).sum(),
        description: format!("multiplex of {} fields", fields.len()),
        occupied_bandwidth_ghz: hi - lo,
    };
    Ok(field)
}

/// A generated channel and the symbol sequences of its subcarriers.
#[derive(Debug, Clone)]
pub struct Channel {
    pub field: SampledField,
    pub subcarriers: Vec<SymbolSequence>,
}

/// Builds a multi-subcarrier QAM channel with the total mean power set
/// exactly to `power_w`.
///
/// Samples are at baseband; the returned field carries `center_offset_ghz`,
/// which `multiplex` applies.
///
/// `stream_base` separates the random streams of different channels within
/// one realization.
pub fn qam_channel(
    subcarriers: &[Subcarrier],
    center_offset_ghz: f64,
    power_w: f64,
    len: usize,
    sample_rate_ghz: f64,
    seed: u64,
    stream_base: u64,
) -> Result<Channel> {
    let mut parts = Vec::with_capacity(subcarriers.len());
    let mut seqs = Vec::with_capacity(subcarriers.len());
    for (i, sc) in subcarriers.iter().enumerate() {
        let sps_f = sample_rate_ghz / sc.symbol_rate_ghz;
        let sps = sps_f.round() as usize;
        if (sps_f - sps as f64).abs() > 1e-9 || !len.is_multiple_of(sps) {
            return Err(Error::InvalidParameter(format!(
                "sample rate {sample_rate_ghz} GHz is not an integer multiple of symbol rate {} GBd dividing {len} samples",
                sc.symbol_rate_ghz
            )));
        }
        let spec = ConstellationSpec::new(sc.qam_order)?;
        let mut rng = stream_rng(seed, stream_base + i as u64);
        let seq = generate_qam_symbols_with(spec, len / sps, &mut rng)?;
        let mut f = rrc_shape(&seq.symbols, sc.symbol_rate_ghz, sc.rolloff, sps)?;
        f.set_launch_power(power_w / subcarriers.len() as f64);
        parts.push(f.with_center_offset(sc.center_offset_ghz));
        seqs.push(seq);
    }
    let mut field = multiplex(&parts)?.with_center_offset(center_offset_ghz);
    field.set_launch_power(power_w);
    field.metadata.seed = Some(seed);
    field.metadata.description = format!("QAM channel, {} subcarrier(s)", subcarriers.len());
    Ok(Channel { field, subcarriers: seqs })
}
