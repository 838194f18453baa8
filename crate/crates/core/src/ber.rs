//! Average BER of Gray-mapped square M-QAM under AWGN and Gaussian phase noise.
//!
//! SNR is `Es/N0` with unit average symbol energy, so each axis carries noise
//! of variance `1/(2·snr)`.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::signal::ConstellationSpec;

pub const DEFAULT_NODES: usize = 64;
const MIN_NODES: usize = 16;
// the Newton root search loses roots beyond this size
const MAX_NODES: usize = 128;
const CONVERGENCE: f64 = 1e-4;

/// Gaussian tail probability `Q(x)`.
pub fn gaussian_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `P(a < X < b)` for `X ~ N(0, 1)`, evaluated on the tail side for accuracy.
fn interval_probability(a: f64, b: f64) -> f64 {
    if a >= 0.0 {
        gaussian_tail(a) - gaussian_tail(b)
    } else if b <= 0.0 {
        gaussian_tail(-b) - gaussian_tail(-a)
    } else {
        1.0 - gaussian_tail(-a) - gaussian_tail(b)
    }
}

/// Expected bit errors on one axis for a transmitted level index `tx`
/// received at `x0` plus noise of standard deviation `sd`.
fn axis_bit_errors(c: &ConstellationSpec, thresholds: &[f64], tx: usize, x0: f64, sd: f64) -> f64 {
    let gtx = c.gray(tx);
    (0..c.side)
        .map(|j| {
            let flips = (c.gray(j) ^ gtx).count_ones();
            if flips == 0 {
                return 0.0;
            }
            let lo = if j == 0 { f64::NEG_INFINITY } else { thresholds[j - 1] };
            let hi = if j + 1 == c.side { f64::INFINITY } else { thresholds[j] };
            flips as f64 * interval_probability((lo - x0) / sd, (hi - x0) / sd)
        })
        .sum()
}

fn conditional(c: &ConstellationSpec, thresholds: &[f64], snr: f64, theta: f64) -> f64 {
    let sd = (0.5 / snr).sqrt();
    let (s, co) = theta.sin_cos();
    let mut errors = 0.0;
    for i in 0..c.side {
        for q in 0..c.side {
            let (li, lq) = (c.level(i), c.level(q));
            let x0 = li * co - lq * s;
            let y0 = li * s + lq * co;
            errors += axis_bit_errors(c, thresholds, i, x0, sd) + axis_bit_errors(c, thresholds, q, y0, sd);
        }
    }
    (errors / (c.order * c.bits_per_symbol()) as f64).clamp(0.0, 1.0)
}

/// BER when every symbol is rotated by `theta` before AWGN at `snr`.
pub fn ber_conditional(order: usize, snr: f64, theta: f64) -> Result<f64> {
    let c = ConstellationSpec::new(order)?;
    if !(snr > 0.0) {
        return Err(Error::InvalidParameter(format!("snr = {snr} must be positive")));
    }
    Ok(conditional(&c, &c.thresholds(), snr, theta))
}

/// Gauss–Hermite nodes and weights for `∫ e^{−x²} f(x) dx`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (PIM4, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-14 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerQuery {
    pub qam_order: usize,
    pub snr_rad_linear: f64,
    pub sigma2_phase: f64,
    pub quadrature_nodes: usize,
}

impl BerQuery {
    pub fn new(qam_order: usize, snr_rad_linear: f64, sigma2_phase: f64) -> Self {
        Self { qam_order, snr_rad_linear, sigma2_phase, quadrature_nodes: DEFAULT_NODES }
    }

    pub fn validate(&self) -> Result<ConstellationSpec> {
        let c = ConstellationSpec::new(self.qam_order)?;
        if !(self.snr_rad_linear > 0.0) {
            return Err(Error::InvalidParameter(format!("snr_rad = {} must be positive", self.snr_rad_linear)));
        }
        if !(self.sigma2_phase >= 0.0) {
            return Err(Error::InvalidParameter(format!("sigma2_phase = {} must be >= 0", self.sigma2_phase)));
        }
        if self.quadrature_nodes < MIN_NODES {
            return Err(Error::InvalidParameter(format!(
                "quadrature_nodes = {} (need >= {MIN_NODES})",
                self.quadrature_nodes
            )));
        }
        Ok(c)
    }
}

fn average_over_phase(c: &ConstellationSpec, thresholds: &[f64], q: &BerQuery, nodes: usize) -> f64 {
    let (x, w) = gauss_hermite(nodes);
    let s = (2.0 * q.sigma2_phase).sqrt();
    let total: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * conditional(c, thresholds, q.snr_rad_linear, s * xi)).sum();
    total / std::f64::consts::PI.sqrt()
}

/// BER averaged over `θ ~ N(0, σ²)`, doubling the node count until the result
/// moves by less than `1e-4` relative.
pub fn ber_phase_noise(query: &BerQuery) -> Result<f64> {
    let c = query.validate()?;
    let thresholds = c.thresholds();
    if query.sigma2_phase == 0.0 {
        return Ok(conditional(&c, &thresholds, query.snr_rad_linear, 0.0));
    }
    let mut nodes = query.quadrature_nodes;
    let mut prev = average_over_phase(&c, &thresholds, query, nodes);
    let mut change = f64::INFINITY;
    while nodes * 2 <= MAX_NODES {
        nodes *= 2;
        let next = average_over_phase(&c, &thresholds, query, nodes);
        change = if next == 0.0 { (next - prev).abs() } else { ((next - prev) / next).abs() };
        prev = next;
        if change < CONVERGENCE {
            return Ok(next);
        }
    }
    Err(Error::NotConverged(change))
}

/// Inputs for one launch power of a BER sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerSweepInput {
    pub launch_power_dbm: f64,
    pub sigma2_evolving: f64,
    pub sigma2_constant: f64,
    pub snr_rad_linear: f64,
    pub ber_measured: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerCurvePoint {
    pub launch_power_dbm: f64,
    pub sigma2_evolving: f64,
    pub sigma2_constant: f64,
    pub snr_rad_db: f64,
    pub ber_evolving: f64,
    pub ber_constant: f64,
    pub ber_measured: Option<f64>,
}

/// Evolving- and constant-IF BER predictions for every sweep point.
pub fn predict_ber_curve(qam_order: usize, inputs: &[BerSweepInput]) -> Result<Vec<BerCurvePoint>> {
    inputs
        .iter()
        .map(|p| {
            let ev = ber_phase_noise(&BerQuery::new(qam_order, p.snr_rad_linear, p.sigma2_evolving))?;
            let co = ber_phase_noise(&BerQuery::new(qam_order, p.snr_rad_linear, p.sigma2_constant))?;
            Ok(BerCurvePoint {
                launch_power_dbm: p.launch_power_dbm,
                sigma2_evolving: p.sigma2_evolving,
                sigma2_constant: p.sigma2_constant,
                snr_rad_db: 10.0 * p.snr_rad_linear.log10(),
                ber_evolving: ev,
                ber_constant: co,
                ber_measured: p.ber_measured,
            })
        })
        .collect()
}
