//! Physical parameter containers and unit conversions.
//!
//! Canonical internal units: km, W, GHz, nm, ps, ps²/km and radians. Every
//! conversion to another unit happens at a function boundary in this module.

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Planck constant (J·s).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Optical carrier used for photon-energy evaluation (THz).
pub const REFERENCE_CARRIER_THZ: f64 = 193.4;

/// Converts an attenuation in dB/km into the linear power attenuation
/// coefficient α in 1/km.
pub fn attenuation_to_linear(alpha_db_per_km: f64) -> f64 {
    alpha_db_per_km * std::f64::consts::LN_10 / 10.0
}

/// Inverse of [`attenuation_to_linear`].
pub fn attenuation_to_db(alpha_per_km: f64) -> f64 {
    alpha_per_km * 10.0 / std::f64::consts::LN_10
}

/// Effective nonlinear length `(1 - e^{-αL}) / α` in km.
///
/// The lossless limit returns `L`.
pub fn effective_length(alpha_per_km: f64, length_km: f64) -> f64 {
    let x = alpha_per_km * length_km;
    if x.abs() < 1e-8 {
        // series: L (1 - x/2 + x²/6)
        length_km * (1.0 - x / 2.0 + x * x / 6.0)
    } else {
        -(-x).exp_m1() / alpha_per_km
    }
}

/// Nonlinear coefficient γ = 2π n₂ / (λ A_eff) in 1/(W·km).
///
/// `n2` in m²/W, `a_eff` in m², `wavelength_nm` in nm.
pub fn nonlinear_coefficient(n2: f64, a_eff: f64, wavelength_nm: f64) -> f64 {
    let lambda_m = wavelength_nm * 1e-9;
    2.0 * std::f64::consts::PI * n2 / (lambda_m * a_eff) * 1e3
}

/// Group-velocity dispersion β₂ = −Dλ²/(2πc) in ps²/km from D in ps/(nm·km).
pub fn dispersion_to_beta2(dispersion_ps_nm_km: f64, wavelength_nm: f64) -> f64 {
    // D [ps/(nm km)] * λ² [nm²] / c [nm/ps]  -> ps²/km
    let c_nm_per_ps = SPEED_OF_LIGHT * 1e9 / 1e12;
    -dispersion_ps_nm_km * wavelength_nm * wavelength_nm
        / (2.0 * std::f64::consts::PI * c_nm_per_ps)
}

/// Inverse of [`dispersion_to_beta2`].
pub fn beta2_to_dispersion(beta2_ps2_per_km: f64, wavelength_nm: f64) -> f64 {
    let c_nm_per_ps = SPEED_OF_LIGHT * 1e9 / 1e12;
    -beta2_ps2_per_km * 2.0 * std::f64::consts::PI * c_nm_per_ps
        / (wavelength_nm * wavelength_nm)
}

/// Wavelength separation Δλ = λ² Δf / c in nm for a frequency spacing in GHz.
pub fn spacing_to_delta_lambda(spacing_ghz: f64, wavelength_nm: f64) -> f64 {
    let lambda_m = wavelength_nm * 1e-9;
    lambda_m * lambda_m * spacing_ghz * 1e9 / SPEED_OF_LIGHT * 1e9
}

/// Inverse of [`spacing_to_delta_lambda`].
pub fn delta_lambda_to_spacing(delta_lambda_nm: f64, wavelength_nm: f64) -> f64 {
    let lambda_m = wavelength_nm * 1e-9;
    delta_lambda_nm * 1e-9 * SPEED_OF_LIGHT / (lambda_m * lambda_m) * 1e-9
}

/// Angular frequency in rad/ps for a frequency in GHz.
#[inline]
pub fn ghz_to_rad_per_ps(f_ghz: f64) -> f64 {
    2.0 * std::f64::consts::PI * f_ghz * 1e-3
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watt(dbm: f64) -> f64 {
    1e-3 * db_to_linear(dbm)
}

pub fn watt_to_dbm(w: f64) -> f64 {
    linear_to_db(w / 1e-3)
}

/// Photon energy hν at the reference carrier (J).
pub fn photon_energy() -> f64 {
    PLANCK * REFERENCE_CARRIER_THZ * 1e12
}

/// Parameters of one fiber span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberParams {
    /// Attenuation (dB/km).
    pub alpha_db_per_km: f64,
    /// Dispersion parameter D (ps/(nm·km)).
    pub dispersion_ps_nm_km: f64,
    /// Nonlinear index n₂ (m²/W).
    pub n2: f64,
    /// Effective area (m²).
    pub a_eff: f64,
    /// Span length (km).
    pub span_length_km: f64,
    /// Reference wavelength (nm).
    pub ref_wavelength_nm: f64,
}

impl Default for FiberParams {
    /// Standard single-mode fiber, 80 km span.
    fn default() -> Self {
        Self {
            alpha_db_per_km: 0.2,
            dispersion_ps_nm_km: 16.0,
            n2: 2.6e-20,
            a_eff: 80e-12,
            span_length_km: 80.0,
            ref_wavelength_nm: 1550.0,
        }
    }
}

impl FiberParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, why: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("fiber.{field}: {why}")))
            }
        };
        check(
            self.alpha_db_per_km.is_finite() && self.alpha_db_per_km >= 0.0,
            "alpha_db_per_km",
            "must be finite and >= 0",
        )?;
        check(self.dispersion_ps_nm_km.is_finite(), "dispersion_ps_nm_km", "must be finite")?;
        check(self.n2.is_finite() && self.n2 >= 0.0, "n2", "must be finite and >= 0")?;
        check(self.a_eff.is_finite() && self.a_eff > 0.0, "a_eff", "must be > 0")?;
        check(
            self.span_length_km.is_finite() && self.span_length_km > 0.0,
            "span_length_km",
            "must be > 0",
        )?;
        check(
            self.ref_wavelength_nm.is_finite() && self.ref_wavelength_nm > 0.0,
            "ref_wavelength_nm",
            "must be > 0",
        )
    }

    /// Linear attenuation α (1/km).
    pub fn alpha(&self) -> f64 {
        attenuation_to_linear(self.alpha_db_per_km)
    }

    /// γ in 1/(W·km).
    pub fn gamma(&self) -> f64 {
        nonlinear_coefficient(self.n2, self.a_eff, self.ref_wavelength_nm)
    }

    /// β₂ in ps²/km.
    pub fn beta2(&self) -> f64 {
        dispersion_to_beta2(self.dispersion_ps_nm_km, self.ref_wavelength_nm)
    }

    pub fn effective_length(&self) -> f64 {
        effective_length(self.alpha(), self.span_length_km)
    }

    /// Span loss in dB.
    pub fn span_loss_db(&self) -> f64 {
        self.alpha_db_per_km * self.span_length_km
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispersionCompensation {
    None,
    FullAtReceiver,
}

/// N identical spans, each followed by a flat-gain amplifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    pub fiber: FiberParams,
    pub num_spans: usize,
    pub amp_gain_db: f64,
    /// `None` disables ASE.
    pub amp_noise_figure_db: Option<f64>,
    pub dispersion_compensation: DispersionCompensation,
}

impl LinkConfig {
    /// Link whose amplifiers exactly cancel the span loss.
    pub fn transparent(fiber: FiberParams, num_spans: usize) -> Self {
        Self {
            fiber,
            num_spans,
            amp_gain_db: fiber.span_loss_db(),
            amp_noise_figure_db: None,
            dispersion_compensation: DispersionCompensation::FullAtReceiver,
        }
    }

    pub fn with_noise_figure(mut self, nf_db: Option<f64>) -> Self {
        self.amp_noise_figure_db = nf_db;
        self
    }

    pub fn is_transparent(&self) -> bool {
        (self.amp_gain_db - self.fiber.span_loss_db()).abs() < 1e-9
    }

    pub fn validate(&self) -> Result<()> {
        self.fiber.validate()?;
        if self.num_spans == 0 {
            return Err(Error::InvalidParameter("link.num_spans: must be >= 1".into()));
        }
        if !(self.amp_gain_db.is_finite() && self.amp_gain_db >= 0.0) {
            return Err(Error::InvalidParameter("link.amp_gain_db: must be >= 0".into()));
        }
        Ok(())
    }

    pub fn total_length_km(&self) -> f64 {
        self.fiber.span_length_km * self.num_spans as f64
    }

    /// Accumulated dispersion D·L_total in ps/nm.
    pub fn accumulated_dispersion(&self) -> f64 {
        self.fiber.dispersion_ps_nm_km * self.total_length_km()
    }
}

/// One shaped QAM subcarrier of a channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subcarrier {
    /// Symbol rate (GBd).
    pub symbol_rate_ghz: f64,
    /// RRC rolloff β.
    pub rolloff: f64,
    /// Center offset relative to the channel center (GHz).
    pub center_offset_ghz: f64,
    pub qam_order: usize,
}

impl Subcarrier {
    /// Occupied bandwidth R(1+β) in GHz.
    pub fn occupied_bandwidth(&self) -> f64 {
        self.symbol_rate_ghz * (1.0 + self.rolloff)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProbeKind {
    /// CW probe with the given power (W).
    Cw { power_w: f64 },
    /// Modulated probe built from the same subcarrier schema as the pump.
    Qam { subcarriers: Vec<Subcarrier>, power_w: f64 },
}

/// Placement of pump and probe inside the simulation band.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPlan {
    /// Pump channel center relative to the band center (GHz).
    pub pump_center_offset_ghz: f64,
    /// Probe channel center relative to the band center (GHz).
    pub probe_center_offset_ghz: f64,
    pub channel_spacing_ghz: f64,
    pub pump_subcarriers: Vec<Subcarrier>,
    /// Total pump launch power (W).
    pub pump_power_w: f64,
    pub probe: ProbeKind,
}

impl ChannelPlan {
    /// Pump and probe symmetric about the band center.
    pub fn symmetric(
        spacing_ghz: f64,
        pump_subcarriers: Vec<Subcarrier>,
        pump_power_w: f64,
        probe: ProbeKind,
    ) -> Self {
        Self {
            pump_center_offset_ghz: -spacing_ghz / 2.0,
            probe_center_offset_ghz: spacing_ghz / 2.0,
            channel_spacing_ghz: spacing_ghz,
            pump_subcarriers,
            pump_power_w,
            probe,
        }
    }

    /// Two-sided extent of the pump relative to its center: (low, high) in GHz.
    pub fn pump_extent(&self) -> (f64, f64) {
        extent(&self.pump_subcarriers)
    }

    /// Bandwidth a brick-wall selector needs to capture the whole pump.
    pub fn pump_occupied_bandwidth(&self) -> f64 {
        let (lo, hi) = self.pump_extent();
        hi - lo
    }

    pub fn validate(&self, sample_rate_ghz: f64) -> Result<()> {
        let sep = (self.pump_center_offset_ghz - self.probe_center_offset_ghz).abs();
        if (sep - self.channel_spacing_ghz).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "channel plan: |pump - probe| = {sep} GHz differs from channel_spacing {}",
                self.channel_spacing_ghz
            )));
        }
        if self.pump_subcarriers.is_empty() {
            return Err(Error::InvalidParameter("channel plan: pump needs at least one subcarrier".into()));
        }
        if !(self.pump_power_w > 0.0) {
            return Err(Error::InvalidParameter("channel plan: pump power must be > 0".into()));
        }
        let usable = 0.9 * sample_rate_ghz / 2.0;
        let (plo, phi) = self.pump_extent();
        let mut lo = self.pump_center_offset_ghz + plo;
        let mut hi = self.pump_center_offset_ghz + phi;
        match &self.probe {
            ProbeKind::Cw { power_w } => {
                if !(*power_w > 0.0) {
                    return Err(Error::InvalidParameter("channel plan: probe power must be > 0".into()));
                }
                lo = lo.min(self.probe_center_offset_ghz);
                hi = hi.max(self.probe_center_offset_ghz);
            }
            ProbeKind::Qam { subcarriers, power_w } => {
                if !(*power_w > 0.0) || subcarriers.is_empty() {
                    return Err(Error::InvalidParameter("channel plan: invalid QAM probe".into()));
                }
                let (a, b) = extent(subcarriers);
                lo = lo.min(self.probe_center_offset_ghz + a);
                hi = hi.max(self.probe_center_offset_ghz + b);
            }
        }
        if lo < -usable || hi > usable {
            return Err(Error::InvalidParameter(format!(
                "channel plan: content [{lo:.3}, {hi:.3}] GHz exceeds the guarded band ±{usable:.3} GHz"
            )));
        }
        Ok(())
    }
}

fn extent(subs: &[Subcarrier]) -> (f64, f64) {
    subs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
        let half = s.occupied_bandwidth() / 2.0;
        (lo.min(s.center_offset_ghz - half), hi.max(s.center_offset_ghz + half))
    })
}
