use std::path::Path;
use std::time::Instant;

use xpm_core::analytic::IfMode;
use xpm_core::ber::{ber_phase_noise, BerQuery};
use xpm_core::metrics::{radial_snr, snr_from_evm};
use xpm_core::Error;

use super::finish_run;
use crate::config::{ExperimentConfig, ProbeType};
use crate::error::{HarnessError, HarnessResult};
use crate::experiment::Scenario;
use crate::output::{write_csv, Cell};

#[derive(Debug, Clone, PartialEq)]
pub struct BerRow {
    pub power_dbm: f64,
    pub sigma2_evolving: f64,
    pub sigma2_constant: f64,
    pub snr_total: f64,
    /// NaN when the phase noise alone exceeds the measured error budget.
    pub snr_rad: f64,
    pub ber_evolving: f64,
    pub ber_constant: f64,
    pub ber_measured: f64,
    pub bits: u64,
}

/// Switch from transmitted-symbol to decided-symbol EVM below this BER.
const DECIDED_EVM_BER: f64 = 1e-2;

/// Model-driven BER against SSFM-measured BER over a pump launch-power grid.
/// The probe stays at `probe.power_dbm`, low enough that its own SPM is
/// negligible, so the nonlinear impairment is the pump-induced XPM.
pub fn run_ber(cfg: &ExperimentConfig, out: &Path) -> HarnessResult<Vec<BerRow>> {
    let started = Instant::now();
    if cfg.probe.kind != ProbeType::Qam {
        return Err(HarnessError::Config("probe.type: the ber recipe needs a qam probe".into()));
    }
    let section = cfg.ber.as_ref().ok_or_else(|| HarnessError::Config("ber: section missing".into()))?;
    let order = cfg.probe.subcarriers[0].qam_order;
    let mut rows = Vec::new();
    for &p in &section.powers_dbm {
        let mut point = cfg.clone();
        point.pump.power_dbm = p;
        let sc = Scenario::new(&point)?;
        let m = sc.measure()?;
        let stats = m.symbols.expect("qam probe yields symbol statistics");
        let s2_ev = sc.analytic(&m.if_stack, IfMode::Evolving)?.variance;
        let s2_co = sc.analytic(&m.if_stack, IfMode::Constant)?.variance;
        let measured = stats.ber();
        let evm = if measured < DECIDED_EVM_BER { stats.evm_decided() } else { stats.evm_known() };
        let snr_total = snr_from_evm(evm);
        let (snr_rad, ber_ev, ber_co) = match radial_snr(snr_total, s2_ev) {
            Ok(snr_rad) => {
                let q = |s2| {
                    let mut query = BerQuery::new(order, snr_rad, s2);
                    query.quadrature_nodes = section.quadrature_nodes;
                    ber_phase_noise(&query)
                };
                (snr_rad, q(s2_ev)?, q(s2_co)?)
            }
            Err(Error::PhaseLimited(_)) => (f64::NAN, f64::NAN, f64::NAN),
            Err(e) => return Err(e.into()),
        };
        rows.push(BerRow {
            power_dbm: p,
            sigma2_evolving: s2_ev,
            sigma2_constant: s2_co,
            snr_total,
            snr_rad,
            ber_evolving: ber_ev,
            ber_constant: ber_co,
            ber_measured: measured,
            bits: stats.bits,
        });
    }
    let columns = [
        "power_dbm",
        "sigma2_evolving",
        "sigma2_constant",
        "snr_rad_db",
        "ber_evolving",
        "ber_constant",
        "ber_measured",
    ];
    let table: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                r.power_dbm.into(),
                r.sigma2_evolving.into(),
                r.sigma2_constant.into(),
                (10.0 * r.snr_rad.log10()).into(),
                r.ber_evolving.into(),
                r.ber_constant.into(),
                r.ber_measured.into(),
            ]
        })
        .collect();
    write_csv(&out.join("ber.csv"), "ber", &cfg.hash(), &columns, &table)?;
    let results = rows
        .iter()
        .flat_map(|r| {
            [
                (format!("ber_evolving@{}", r.power_dbm), r.ber_evolving),
                (format!("ber_constant@{}", r.power_dbm), r.ber_constant),
                (format!("ber_measured@{}", r.power_dbm), r.ber_measured),
            ]
        })
        .collect();
    finish_run(cfg, out, "ber", started, results, vec!["ber.csv".into()])?;
    Ok(rows)
}
