//! Expectation ratio `Q = E|υ| / |E υ|` of the random phasor sum
//! `υ = Σ a_k e^{−jC(k−1)}` with i.i.d. Rayleigh amplitudes.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::signal::stream_rng;

/// `σ²/μ²` of a Rayleigh amplitude, `(4 − π)/π`.
pub const RAYLEIGH_VARIANCE_RATIO: f64 = (4.0 - PI) / PI;

const MIN_TRIALS: usize = 10_000;
/// Fixed batch count for the batch-means confidence interval.
const BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QEstimate {
    pub mean: f64,
    /// Half-width of the 95% confidence interval.
    pub ci95: f64,
    pub trials: usize,
}

impl QEstimate {
    pub fn lower(&self) -> f64 {
        self.mean - self.ci95
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.ci95
    }
}

/// `R = |Σ_k e^{−jC(k−1)}|`.
fn coherent_magnitude(n: usize, c: f64) -> f64 {
    (0..n).map(|k| Complex64::from_polar(1.0, -c * k as f64)).sum::<Complex64>().norm()
}

/// Bounds `(1, √(1 + Nσ²/(μ²R²)))`; the upper bound is infinite at a null of `R`.
pub fn q_ratio_bound(n: usize, c: f64, mu: f64, sigma: f64) -> Result<(f64, f64)> {
    if !(mu > 0.0) || sigma < 0.0 || n == 0 {
        return Err(Error::InvalidParameter(format!("q bound needs mu > 0, sigma >= 0, N >= 1 (mu={mu}, sigma={sigma}, N={n})")));
    }
    let r = coherent_magnitude(n, c);
    if r < 1e-9 * n as f64 {
        return Ok((1.0, f64::INFINITY));
    }
    Ok((1.0, (1.0 + n as f64 * sigma * sigma / (mu * mu * r * r)).sqrt()))
}

/// Rayleigh draw with mean `mu`.
#[inline]
fn rayleigh<R: Rng>(rng: &mut R, mu: f64) -> f64 {
    let scale = mu / (PI / 2.0).sqrt();
    let u: f64 = 1.0 - rng.gen::<f64>();
    scale * (-2.0 * u.ln()).sqrt()
}

fn phasors(n: usize, c: f64) -> Vec<Complex64> {
    (0..n).map(|k| Complex64::from_polar(1.0, -c * k as f64)).collect()
}

/// Per batch: trial count and, per `C`, sums of `|υ|` and of `υ`.
///
/// Every batch draws from its own RNG stream, so results are independent of
/// the thread count.
fn batch_sums(n: usize, mu: f64, trials: usize, seed: u64, grid: &[Vec<Complex64>]) -> Vec<(usize, Vec<(f64, Complex64)>)> {
    (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let count = trials / BATCHES + usize::from(b < trials % BATCHES);
            let mut rng = stream_rng(seed, b as u64);
            let mut amps = vec![0.0; n];
            let mut sums = vec![(0.0, Complex64::new(0.0, 0.0)); grid.len()];
            for _ in 0..count {
                amps.iter_mut().for_each(|a| *a = rayleigh(&mut rng, mu));
                for (s, ph) in sums.iter_mut().zip(grid) {
                    let v: Complex64 = amps.iter().zip(ph).map(|(a, p)| p * a).sum();
                    s.0 += v.norm();
                    s.1 += v;
                }
            }
            (count, sums)
        })
        .collect()
}

/// Combines batch sums into an estimate over all trials and a batch-means
/// interval. `ratio` receives per-`C` sums and their trial count.
fn estimate(
    batches: &[(usize, Vec<(f64, Complex64)>)],
    trials: usize,
    ratio: impl Fn(&[(f64, Complex64)], usize) -> f64,
) -> QEstimate {
    let m = batches[0].1.len();
    let mut total = vec![(0.0, Complex64::new(0.0, 0.0)); m];
    for (_, b) in batches {
        for (t, s) in total.iter_mut().zip(b) {
            t.0 += s.0;
            t.1 += s.1;
        }
    }
    let mean = ratio(&total, trials);
    let per: Vec<f64> = batches.iter().map(|(c, b)| ratio(b, *c)).collect();
    let bm = per.iter().sum::<f64>() / per.len() as f64;
    let var = per.iter().map(|q| (q - bm).powi(2)).sum::<f64>() / (per.len() - 1) as f64;
    QEstimate { mean, ci95: 1.96 * (var / per.len() as f64).sqrt(), trials }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidParameter(format!("trials = {trials} (need >= {MIN_TRIALS})")));
    }
    Ok(())
}

/// Monte-Carlo estimate of `Q(N, C) = E|υ| / (μR)` with Rayleigh amplitudes
/// of mean `mu`; `μR = |E υ|` is exact.
pub fn q_ratio_monte_carlo(n: usize, c: f64, mu: f64, trials: usize, seed: u64) -> Result<QEstimate> {
    check_trials(trials)?;
    if n == 0 || !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!("q ratio needs N >= 1 and mu > 0 (N={n}, mu={mu})")));
    }
    let r = coherent_magnitude(n, c);
    if r < 1e-9 * n as f64 {
        return Err(Error::UndefinedQ(c));
    }
    let batches = batch_sums(n, mu, trials, seed, &[phasors(n, c)]);
    Ok(estimate(&batches, trials, |s, count| s[0].0 / count as f64 / (mu * r)))
}

/// `Q` averaged over `C` uniform on `[0, 2π)` using `c_points` midpoints.
///
/// Each `C` is weighted by its squared coherent mean:
/// `Σ_C E|υ_C|·|E υ_C| / Σ_C |E υ_C|²`. Nulls of `R` drop out with vanishing
/// weight, the result never falls below 1, and with `⟨R²⟩ = N` the
/// Cauchy-Schwarz inequality caps it at `√(4/π)`.
pub fn q_ratio_c_averaged(n: usize, c_points: usize, mu: f64, trials: usize, seed: u64) -> Result<QEstimate> {
    check_trials(trials)?;
    if n == 0 || c_points == 0 || !(mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "q average needs N >= 1, C points >= 1, mu > 0 (N={n}, points={c_points}, mu={mu})"
        )));
    }
    let grid: Vec<Vec<Complex64>> = (0..c_points)
        .map(|j| phasors(n, 2.0 * PI * (j as f64 + 0.5) / c_points as f64))
        .collect();
    let batches = batch_sums(n, mu, trials, seed, &grid);
    Ok(estimate(&batches, trials, |s, _| {
        let num: f64 = s.iter().map(|(a, v)| a * v.norm()).sum();
        let den: f64 = s.iter().map(|(_, v)| v.norm_sqr()).sum();
        num / den
    }))
}
