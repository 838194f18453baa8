//! Experiment configuration: a versioned TOML tree with `desk` and `paper`
//! presets. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use xpm_core::analytic::{DeltaLambdaRange, IfMode, KMode, XpmModelConfig};
use xpm_core::propagation::{StepConfig, StepMode};
use xpm_core::units::{dbm_to_watt, ChannelPlan, DispersionCompensation, FiberParams, LinkConfig, ProbeKind, Subcarrier};

use crate::error::{HarnessError, HarnessResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub output_dir: String,
    pub fiber: FiberSection,
    pub link: LinkSection,
    pub pump: PumpSection,
    pub probe: ProbeSection,
    pub simulation: SimulationSection,
    pub model: ModelSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ber: Option<BerSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_ratio: Option<QRatioSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSection {
    pub alpha_db_per_km: f64,
    pub dispersion_ps_nm_km: f64,
    /// m²/W
    pub n2: f64,
    /// µm²
    pub a_eff_um2: f64,
    pub span_length_km: f64,
    pub wavelength_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub num_spans: usize,
    /// Omitted for noiseless amplifiers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_figure_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubcarrierSection {
    pub symbol_rate_gbd: f64,
    pub rolloff: f64,
    /// Offset from the channel center.
    pub offset_ghz: f64,
    pub qam_order: usize,
}

impl SubcarrierSection {
    fn to_core(&self) -> Subcarrier {
        Subcarrier {
            symbol_rate_ghz: self.symbol_rate_gbd,
            rolloff: self.rolloff,
            center_offset_ghz: self.offset_ghz,
            qam_order: self.qam_order,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSection {
    pub power_dbm: f64,
    pub channel_spacing_ghz: f64,
    pub subcarriers: Vec<SubcarrierSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeType {
    Cw,
    Qam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSection {
    #[serde(rename = "type")]
    pub kind: ProbeType,
    pub power_dbm: f64,
    /// QAM probes only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subcarriers: Vec<SubcarrierSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepModeName {
    Fixed,
    Logarithmic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    /// Symbols per subcarrier and realization.
    pub symbols: usize,
    pub realizations: usize,
    /// Chosen from the symbol rate and channel plan when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_rate_ghz: Option<f64>,
    pub step_km: f64,
    pub step_mode: StepModeName,
    /// Brick-wall probe filter bandwidth at the receiver.
    pub receiver_filter_ghz: f64,
    /// Width of the bands used when comparing spectra in dB.
    pub comparison_band_ghz: f64,
    pub comparison_range_ghz: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KModeName {
    Coherent,
    Incoherent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IfModeName {
    Constant,
    Evolving,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandName {
    Nyquist,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub k_mode: KModeName,
    pub if_mode: IfModeName,
    pub band: BandName,
    pub quadrature_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    /// Number of spans.
    Distance,
    Dispersion,
    Spacing,
    /// Pump launch power in dBm.
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BerSection {
    /// Pump launch powers (dBm).
    pub powers_dbm: Vec<f64>,
    pub quadrature_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QRatioSection {
    pub spans: Vec<usize>,
    /// Values of C for the per-C table (rad).
    pub c_values: Vec<f64>,
    /// Midpoints of [0, 2π) for the C-averaged row.
    pub c_points: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Paper,
}

impl std::str::FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(format!("unknown preset `{other}` (desk|paper)")),
        }
    }
}

fn ssmf_section() -> FiberSection {
    FiberSection {
        alpha_db_per_km: 0.2,
        dispersion_ps_nm_km: 16.0,
        n2: 2.6e-20,
        a_eff_um2: 80.0,
        span_length_km: 80.0,
        wavelength_nm: 1550.0,
    }
}

fn single_carrier(rate: f64) -> Vec<SubcarrierSection> {
    vec![SubcarrierSection { symbol_rate_gbd: rate, rolloff: 0.0, offset_ghz: 0.0, qam_order: 16 }]
}

/// Two subcarriers of rate `rate` spaced `R(1+β) + 0.25` GHz apart.
pub fn two_subcarriers(rate: f64, rolloff: f64) -> Vec<SubcarrierSection> {
    let d = (rate * (1.0 + rolloff) + 0.25) / 2.0;
    [-d, d]
        .iter()
        .map(|&o| SubcarrierSection { symbol_rate_gbd: rate, rolloff, offset_ghz: o, qam_order: 16 })
        .collect()
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Desk => Self {
                schema_version: SCHEMA_VERSION,
                seed: 1,
                output_dir: "out".into(),
                fiber: ssmf_section(),
                link: LinkSection { num_spans: 5, noise_figure_db: None },
                pump: PumpSection { power_dbm: 0.0, channel_spacing_ghz: 50.0, subcarriers: single_carrier(32.0) },
                probe: ProbeSection { kind: ProbeType::Cw, power_dbm: -10.0, subcarriers: vec![] },
                simulation: SimulationSection {
                    symbols: 1 << 14,
                    realizations: 8,
                    sample_rate_ghz: None,
                    step_km: 0.5,
                    step_mode: StepModeName::Fixed,
                    receiver_filter_ghz: 32.0,
                    comparison_band_ghz: 0.25,
                    comparison_range_ghz: [0.5, 16.0],
                },
                model: ModelSection {
                    k_mode: KModeName::Incoherent,
                    if_mode: IfModeName::Both,
                    band: BandName::Nyquist,
                    quadrature_points: 33,
                },
                sweep: None,
                ber: None,
                q_ratio: None,
            },
            Preset::Paper => Self {
                schema_version: SCHEMA_VERSION,
                seed: 1,
                output_dir: "out".into(),
                fiber: ssmf_section(),
                link: LinkSection { num_spans: 10, noise_figure_db: None },
                pump: PumpSection { power_dbm: 0.0, channel_spacing_ghz: 50.0, subcarriers: two_subcarriers(16.0, 0.05) },
                probe: ProbeSection { kind: ProbeType::Cw, power_dbm: -20.0, subcarriers: vec![] },
                simulation: SimulationSection {
                    symbols: 1 << 18,
                    realizations: 50,
                    sample_rate_ghz: None,
                    step_km: 0.1,
                    step_mode: StepModeName::Fixed,
                    receiver_filter_ghz: 12.0,
                    comparison_band_ghz: 0.25,
                    comparison_range_ghz: [0.5, 6.0],
                },
                model: ModelSection {
                    k_mode: KModeName::Incoherent,
                    if_mode: IfModeName::Both,
                    band: BandName::Nyquist,
                    quadrature_points: 33,
                },
                sweep: None,
                ber: None,
                q_ratio: None,
            },
        }
    }

    pub fn from_toml(text: &str) -> HarnessResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> HarnessResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Resolved configuration as TOML, the form persisted next to results.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the resolved TOML, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> HarnessResult<()> {
        let bad = |field: &str, why: String| Err(HarnessError::Config(format!("{field}: {why}")));
        if self.schema_version != SCHEMA_VERSION {
            return bad("schema_version", format!("{} is not supported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.pump.subcarriers.is_empty() {
            return bad("pump.subcarriers", "at least one subcarrier required".into());
        }
        if self.probe.kind == ProbeType::Qam && self.probe.subcarriers.is_empty() {
            return bad("probe.subcarriers", "a QAM probe needs subcarriers".into());
        }
        let sim = &self.simulation;
        if sim.realizations == 0 {
            return bad("simulation.realizations", "must be >= 1".into());
        }
        if sim.symbols < 32 {
            return bad("simulation.symbols", format!("{} (need >= 32)", sim.symbols));
        }
        if !(sim.receiver_filter_ghz > 0.0) {
            return bad("simulation.receiver_filter_ghz", "must be > 0".into());
        }
        if !(sim.comparison_band_ghz > 0.0) || !(sim.comparison_range_ghz[1] > sim.comparison_range_ghz[0]) {
            return bad("simulation.comparison_range_ghz", "empty comparison range".into());
        }
        if self.model.quadrature_points < 2 {
            return bad("model.quadrature_points", format!("{} (need >= 2)", self.model.quadrature_points));
        }
        self.fiber_params().validate().map_err(|e| HarnessError::Config(format!("fiber: {e}")))?;
        self.link_config().validate().map_err(|e| HarnessError::Config(format!("link: {e}")))?;
        self.step_config()
            .validate(self.fiber.span_length_km)
            .map_err(|e| HarnessError::Config(format!("simulation.step_km: {e}")))?;
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return bad("sweep.values", "empty".into());
            }
        }
        if let Some(q) = &self.q_ratio {
            if q.trials < 10_000 {
                return bad("q_ratio.trials", format!("{} (need >= 10000)", q.trials));
            }
        }
        Ok(())
    }

    pub fn fiber_params(&self) -> FiberParams {
        let f = &self.fiber;
        FiberParams {
            alpha_db_per_km: f.alpha_db_per_km,
            dispersion_ps_nm_km: f.dispersion_ps_nm_km,
            n2: f.n2,
            a_eff: f.a_eff_um2 * 1e-12,
            span_length_km: f.span_length_km,
            ref_wavelength_nm: f.wavelength_nm,
        }
    }

    pub fn link_config(&self) -> LinkConfig {
        LinkConfig {
            fiber: self.fiber_params(),
            num_spans: self.link.num_spans,
            amp_gain_db: self.fiber.alpha_db_per_km * self.fiber.span_length_km,
            amp_noise_figure_db: self.link.noise_figure_db,
            dispersion_compensation: DispersionCompensation::FullAtReceiver,
        }
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            step_km: self.simulation.step_km,
            mode: match self.simulation.step_mode {
                StepModeName::Fixed => StepMode::Fixed,
                StepModeName::Logarithmic => StepMode::Logarithmic,
            },
        }
    }

    pub fn pump_subcarriers(&self) -> Vec<Subcarrier> {
        self.pump.subcarriers.iter().map(SubcarrierSection::to_core).collect()
    }

    pub fn channel_plan(&self) -> ChannelPlan {
        let probe = match self.probe.kind {
            ProbeType::Cw => ProbeKind::Cw { power_w: dbm_to_watt(self.probe.power_dbm) },
            ProbeType::Qam => ProbeKind::Qam {
                subcarriers: self.probe.subcarriers.iter().map(SubcarrierSection::to_core).collect(),
                power_w: dbm_to_watt(self.probe.power_dbm),
            },
        };
        ChannelPlan::symmetric(self.pump.channel_spacing_ghz, self.pump_subcarriers(), dbm_to_watt(self.pump.power_dbm), probe)
    }

    pub fn k_mode(&self) -> KMode {
        match self.model.k_mode {
            KModeName::Coherent => KMode::Coherent,
            KModeName::Incoherent => KMode::Incoherent,
        }
    }

    /// IF modes to evaluate, evolving first.
    pub fn if_modes(&self) -> Vec<IfMode> {
        match self.model.if_mode {
            IfModeName::Constant => vec![IfMode::Constant],
            IfModeName::Evolving => vec![IfMode::Evolving],
            IfModeName::Both => vec![IfMode::Evolving, IfMode::Constant],
        }
    }

    /// Analytic model matching this configuration, limited to the receiver band.
    pub fn model_config(&self, if_mode: IfMode) -> HarnessResult<XpmModelConfig> {
        let wl = self.fiber.wavelength_nm;
        let sep = -self.pump.channel_spacing_ghz;
        let bands = self
            .pump_subcarriers()
            .iter()
            .map(|s| match self.model.band {
                BandName::Nyquist => DeltaLambdaRange::nyquist(s, sep, wl),
                BandName::Full => DeltaLambdaRange::full_band(s, sep, wl),
            })
            .collect::<xpm_core::Result<Vec<_>>>()
            .map_err(|e| HarnessError::Config(format!("pump.subcarriers: {e}")))?;
        let mut m = XpmModelConfig::new(self.fiber_params(), self.link.num_spans, bands);
        m.k_mode = self.k_mode();
        m.if_mode = if_mode;
        m.quadrature_points = self.model.quadrature_points;
        m.max_frequency_ghz = Some(self.simulation.receiver_filter_ghz / 2.0);
        Ok(m)
    }

    /// Writes the resolved configuration next to the results.
    pub fn persist(&self, dir: &Path) -> HarnessResult<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.resolved.toml"), self.to_toml())?;
        Ok(())
    }
}
