//! Pump-probe experiments: builds the simulation from a config, runs seeded
//! realizations and folds them into ensemble estimates.

use num_complex::Complex64;
use rayon::prelude::*;
use xpm_core::analytic::{passband_phase_spectrum, IfMode};
use xpm_core::field::Spectrum;
use xpm_core::metrics::{evm, extract_phase, phase_psd, EvmReference};
use xpm_core::propagation::{
    bandpass_filter, chromatic_dispersion_compensate, propagate_link, to_baseband, IfStack, PumpTap, StepConfig,
};
use xpm_core::signal::{cw_probe, multiplex, qam_channel, rrc_filter, SymbolSequence};
use xpm_core::units::{ChannelPlan, LinkConfig, ProbeKind, Subcarrier};
use xpm_core::SampledField;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, HarnessResult};

/// Random stream offset separating probe symbols from pump symbols.
const PROBE_STREAM: u64 = 1 << 10;
const MAX_SAMPLE_RATE_GHZ: f64 = 8192.0;

/// A resolved, ready-to-run experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ExperimentConfig,
    pub link: LinkConfig,
    pub plan: ChannelPlan,
    pub step: StepConfig,
    pub tap: PumpTap,
    pub sample_rate_ghz: f64,
    pub len: usize,
}

fn all_subcarriers(plan: &ChannelPlan) -> Vec<Subcarrier> {
    let mut subs = plan.pump_subcarriers.clone();
    if let ProbeKind::Qam { subcarriers, .. } = &plan.probe {
        subs.extend(subcarriers.iter().copied());
    }
    subs
}

/// Smallest power-of-two multiple of the symbol rate that is at least four
/// times the channel spacing and keeps every channel and the probe filter
/// inside the guarded band.
pub fn auto_sample_rate(plan: &ChannelPlan, filter_ghz: f64) -> HarnessResult<f64> {
    let subs = all_subcarriers(plan);
    let rate = subs[0].symbol_rate_ghz;
    if subs.iter().any(|s| (s.symbol_rate_ghz - rate).abs() > 1e-12) {
        return Err(HarnessError::Config(
            "simulation.sample_rate_ghz: mixed symbol rates need an explicit sample rate".into(),
        ));
    }
    let mut fs = 2.0 * rate;
    while fs <= MAX_SAMPLE_RATE_GHZ {
        let filter_edge = plan.probe_center_offset_ghz.abs() + filter_ghz / 2.0;
        if fs >= 4.0 * plan.channel_spacing_ghz && filter_edge < fs / 2.0 && plan.validate(fs).is_ok() {
            return Ok(fs);
        }
        fs *= 2.0;
    }
    Err(HarnessError::Config(format!(
        "no sample rate up to {MAX_SAMPLE_RATE_GHZ} GHz fits the channel plan"
    )))
}

impl Scenario {
    pub fn new(config: &ExperimentConfig) -> HarnessResult<Self> {
        config.validate()?;
        let plan = config.channel_plan();
        let filter = config.simulation.receiver_filter_ghz;
        let fs = match config.simulation.sample_rate_ghz {
            Some(fs) => fs,
            None => auto_sample_rate(&plan, filter)?,
        };
        plan.validate(fs).map_err(|e| HarnessError::Config(format!("pump/probe: {e}")))?;
        let rate = plan.pump_subcarriers[0].symbol_rate_ghz;
        let sps = fs / rate;
        if (sps - sps.round()).abs() > 1e-9 {
            return Err(HarnessError::Config(format!(
                "simulation.sample_rate_ghz: {fs} is not a multiple of {rate} GBd"
            )));
        }
        let len = config.simulation.symbols * sps.round() as usize;
        if !len.is_power_of_two() {
            return Err(HarnessError::Config(format!(
                "simulation.symbols: {} symbols x {} samples/symbol is not a power of two",
                config.simulation.symbols,
                sps.round()
            )));
        }
        let (lo, hi) = plan.pump_extent();
        let tap = PumpTap::for_pump(plan.pump_center_offset_ghz + (lo + hi) / 2.0, hi - lo);
        Ok(Self {
            config: config.clone(),
            link: config.link_config(),
            plan,
            step: config.step_config(),
            tap,
            sample_rate_ghz: fs,
            len,
        })
    }

    pub fn df(&self) -> f64 {
        self.sample_rate_ghz / self.len as f64
    }

    /// Seed of realization `r`.
    pub fn realization_seed(&self, r: usize) -> u64 {
        self.config.seed.wrapping_add(r as u64)
    }

    fn probe_filter_ghz(&self) -> f64 {
        match &self.plan.probe {
            ProbeKind::Cw { .. } => self.config.simulation.receiver_filter_ghz,
            ProbeKind::Qam { subcarriers, .. } => {
                let (lo, hi) = subcarrier_extent(subcarriers);
                self.config.simulation.receiver_filter_ghz.max(hi - lo + 2.0)
            }
        }
    }

    /// Transmitter field: pump plus probe.
    pub fn transmitter(&self, seed: u64) -> HarnessResult<(SampledField, Vec<SymbolSequence>)> {
        let (n, fs) = (self.len, self.sample_rate_ghz);
        let pump = qam_channel(&self.plan.pump_subcarriers, self.plan.pump_center_offset_ghz, self.plan.pump_power_w, n, fs, seed, 0)?;
        let (probe, seqs) = match &self.plan.probe {
            ProbeKind::Cw { power_w } => (cw_probe(*power_w, n, fs)?.with_center_offset(self.plan.probe_center_offset_ghz), vec![]),
            ProbeKind::Qam { subcarriers, power_w } => {
                let ch = qam_channel(subcarriers, self.plan.probe_center_offset_ghz, *power_w, n, fs, seed, PROBE_STREAM)?;
                (ch.field, ch.subcarriers)
            }
        };
        Ok((multiplex(&[pump.field, probe])?, seqs))
    }

    /// One seeded realization: propagate, tap the pump IF per span and
    /// measure the probe.
    pub fn run_realization(&self, seed: u64) -> HarnessResult<Realization> {
        let (tx, seqs) = self.transmitter(seed)?;
        let (out, if_stack) = propagate_link(&tx, &self.link, &self.step, &self.tap, seed)?;
        let rx = chromatic_dispersion_compensate(&out, self.link.accumulated_dispersion(), self.link.fiber.ref_wavelength_nm);
        let center = self.plan.probe_center_offset_ghz;
        let probe = to_baseband(&bandpass_filter(&rx, center, self.probe_filter_ghz())?, center);
        match &self.plan.probe {
            ProbeKind::Cw { .. } => {
                let phase = extract_phase(&probe)?;
                let psd = phase_psd(std::slice::from_ref(&phase))?.psd();
                let variance = phase.samples.iter().map(|p| p * p).sum::<f64>() / phase.len() as f64;
                Ok(Realization { if_stack, phase_psd: psd, phase_variance: variance, symbols: None })
            }
            ProbeKind::Qam { subcarriers, .. } => {
                let stats = receive_symbols(&probe, subcarriers, &seqs)?;
                Ok(Realization { if_stack, phase_psd: vec![0.0; self.len], phase_variance: 0.0, symbols: Some(stats) })
            }
        }
    }

    /// Runs all realizations and folds them in index order.
    ///
    /// Realizations are computed in parallel batches of the pool size so the
    /// memory footprint stays bounded; the fold order never depends on
    /// scheduling.
    pub fn measure(&self) -> HarnessResult<Measurement> {
        let total = self.config.simulation.realizations;
        let batch = rayon::current_num_threads().max(1);
        let mut acc: Option<Accumulator> = None;
        let mut start = 0;
        while start < total {
            let end = (start + batch).min(total);
            let results: Vec<HarnessResult<Realization>> =
                (start..end).into_par_iter().map(|r| self.run_realization(self.realization_seed(r))).collect();
            for r in results {
                let r = r?;
                acc.get_or_insert_with(|| Accumulator::new(&r)).add(r);
            }
            start = end;
        }
        Ok(acc.expect("at least one realization").finish(self.sample_rate_ghz))
    }

    /// Analytic spectrum (per-tone power, K applied) and variance for `mode`.
    pub fn analytic(&self, if_stack: &IfStack, mode: IfMode) -> HarnessResult<Analytic> {
        let model = self.config.model_config(mode)?;
        let s = passband_phase_spectrum(&model, if_stack)?;
        let psd = s.psd_scaled(model.k());
        let variance = psd.iter().sum();
        Ok(Analytic { mode, psd, variance })
    }
}

fn subcarrier_extent(subs: &[Subcarrier]) -> (f64, f64) {
    subs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        let h = s.occupied_bandwidth() / 2.0;
        (lo.min(s.center_offset_ghz - h), hi.max(s.center_offset_ghz + h))
    })
}

/// Symbol-level statistics of a QAM probe.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymbolStats {
    pub error_power: f64,
    pub decided_error_power: f64,
    pub reference_power: f64,
    pub bit_errors: u64,
    pub bits: u64,
}

impl SymbolStats {
    fn add(&mut self, o: &SymbolStats) {
        self.error_power += o.error_power;
        self.decided_error_power += o.decided_error_power;
        self.reference_power += o.reference_power;
        self.bit_errors += o.bit_errors;
        self.bits += o.bits;
    }

    pub fn ber(&self) -> f64 {
        self.bit_errors as f64 / self.bits as f64
    }

    /// EVM against the transmitted symbols.
    pub fn evm_known(&self) -> f64 {
        (self.error_power / self.reference_power).sqrt()
    }

    /// EVM against the decided symbols.
    pub fn evm_decided(&self) -> f64 {
        (self.decided_error_power / self.reference_power).sqrt()
    }
}

/// Matched-filters every probe subcarrier, removes the static complex gain
/// and compares against the transmitted symbols.
fn receive_symbols(probe: &SampledField, subs: &[Subcarrier], seqs: &[SymbolSequence]) -> HarnessResult<SymbolStats> {
    let mut stats = SymbolStats::default();
    for (sub, seq) in subs.iter().zip(seqs) {
        let bb = to_baseband(probe, sub.center_offset_ghz);
        let mf = rrc_filter(&bb, sub.symbol_rate_ghz, sub.rolloff);
        let sps = mf.len() / seq.symbols.len();
        let rx: Vec<Complex64> = mf.samples().iter().step_by(sps).copied().collect();
        // static gain and phase, data aided
        let g = rx.iter().zip(&seq.symbols).map(|(r, t)| r * t.conj()).sum::<Complex64>()
            / seq.symbols.iter().map(|t| t.norm_sqr()).sum::<f64>();
        if !(g.norm() > 0.0) {
            return Err(HarnessError::Numerical(xpm_core::Error::NonFinite("probe gain estimate".into())));
        }
        let rx: Vec<Complex64> = rx.iter().map(|r| r / g).collect();
        let c = seq.constellation;
        let n = rx.len() as f64;
        let known = evm(&rx, &c, EvmReference::Known(&seq.symbols))?;
        let decided = evm(&rx, &c, EvmReference::Decided)?;
        let ref_power = seq.symbols.iter().map(|t| t.norm_sqr()).sum::<f64>();
        stats.add(&SymbolStats {
            error_power: known * known * ref_power,
            decided_error_power: decided * decided * ref_power,
            reference_power: ref_power,
            bit_errors: rx.iter().zip(&seq.indices).map(|(r, idx)| c.bit_errors(*idx, c.decide(*r)) as u64).sum(),
            bits: (n as usize * c.bits_per_symbol()) as u64,
        });
    }
    Ok(stats)
}

/// Output of one realization.
#[derive(Debug, Clone)]
pub struct Realization {
    pub if_stack: IfStack,
    /// Per-tone phase power |Φ_k|².
    pub phase_psd: Vec<f64>,
    pub phase_variance: f64,
    pub symbols: Option<SymbolStats>,
}

struct Accumulator {
    if_power: Vec<Vec<f64>>,
    phase_power: Vec<f64>,
    variance: f64,
    symbols: Option<SymbolStats>,
    count: usize,
}

impl Accumulator {
    fn new(first: &Realization) -> Self {
        Self {
            if_power: first.if_stack.per_span.iter().map(|s| vec![0.0; s.len()]).collect(),
            phase_power: vec![0.0; first.phase_psd.len()],
            variance: 0.0,
            symbols: first.symbols.map(|_| SymbolStats::default()),
            count: 0,
        }
    }

    fn add(&mut self, r: Realization) {
        for (acc, s) in self.if_power.iter_mut().zip(&r.if_stack.per_span) {
            acc.iter_mut().zip(&s.values).for_each(|(a, v)| *a += v * v);
        }
        self.phase_power.iter_mut().zip(&r.phase_psd).for_each(|(a, v)| *a += v);
        self.variance += r.phase_variance;
        if let (Some(acc), Some(s)) = (self.symbols.as_mut(), r.symbols.as_ref()) {
            acc.add(s);
        }
        self.count += 1;
    }

    fn finish(self, fs: f64) -> Measurement {
        let c = self.count as f64;
        let per_span = self
            .if_power
            .into_iter()
            .map(|p| Spectrum::new(fs, p.into_iter().map(|v| (v / c).sqrt()).collect()))
            .collect();
        Measurement {
            if_stack: IfStack::new(per_span).expect("taps share one grid"),
            phase_psd: self.phase_power.into_iter().map(|v| v / c).collect(),
            phase_variance: self.variance / c,
            symbols: self.symbols,
            realizations: self.count,
        }
    }
}

/// Ensemble estimates over all realizations.
#[derive(Debug, Clone)]
pub struct Measurement {
    /// RMS-over-realizations IF amplitude per span.
    pub if_stack: IfStack,
    /// Power-averaged phase periodogram, per tone.
    pub phase_psd: Vec<f64>,
    pub phase_variance: f64,
    pub symbols: Option<SymbolStats>,
    pub realizations: usize,
}

#[derive(Debug, Clone)]
pub struct Analytic {
    pub mode: IfMode,
    pub psd: Vec<f64>,
    pub variance: f64,
}

/// Band averages of a two-sided per-tone spectrum, folding ±f, over
/// `[lo, hi)` in bands of `width`. Returns (band center, mean power per tone).
pub fn band_average(psd: &[f64], df: f64, lo: f64, hi: f64, width: f64) -> Vec<(f64, f64)> {
    let n = psd.len();
    let nb = ((hi - lo) / width).round() as usize;
    let mut sums = vec![(0.0, 0usize); nb];
    for k in 1..n / 2 {
        let f = k as f64 * df;
        if f < lo || f >= hi {
            continue;
        }
        let b = (((f - lo) / width) as usize).min(nb - 1);
        sums[b].0 += psd[k] + psd[n - k];
        sums[b].1 += 2;
    }
    sums.iter()
        .enumerate()
        .filter(|(_, s)| s.1 > 0)
        .map(|(i, s)| (lo + (i as f64 + 0.5) * width, s.0 / s.1 as f64))
        .collect()
}

/// Mean absolute deviation in dB between two band-averaged spectra.
pub fn mad_db(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| (10.0 * (x.1 / y.1).log10()).abs()).collect();
    d.iter().sum::<f64>() / d.len() as f64
}

/// Fraction of bands where `candidate` is closer (in dB) to `reference` than `other`.
pub fn closer_fraction(candidate: &[(f64, f64)], other: &[(f64, f64)], reference: &[(f64, f64)]) -> f64 {
    let wins = candidate
        .iter()
        .zip(other)
        .zip(reference)
        .filter(|((c, o), r)| (c.1 / r.1).log10().abs() < (o.1 / r.1).log10().abs())
        .count();
    wins as f64 / reference.len() as f64
}
