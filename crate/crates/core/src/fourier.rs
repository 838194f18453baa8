//! Thin wrappers over `rustfft` with a per-thread planner cache.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward DFT, no normalization.
pub fn fft(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// In-place inverse DFT scaled by `1/n`, so `ifft(fft(x)) == x`.
pub fn ifft(buf: &mut [Complex64]) {
    ifft_unnormalized(buf);
    let s = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|z| *z *= s);
}

pub fn ifft_unnormalized(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
}

/// Frequency of DFT bin `k` (FFT order) in the units of `sample_rate`.
#[inline]
pub fn bin_frequency(k: usize, n: usize, sample_rate: f64) -> f64 {
    let df = sample_rate / n as f64;
    if k < n.div_ceil(2) {
        k as f64 * df
    } else {
        (k as f64 - n as f64) * df
    }
}

/// Bin frequencies in FFT order.
pub fn frequencies(n: usize, sample_rate: f64) -> Vec<f64> {
    (0..n).map(|k| bin_frequency(k, n, sample_rate)).collect()
}

/// Multiplies by `exp(i 2π shift n / N)`, moving the spectrum up by `shift` bins.
pub fn shift_bins(buf: &mut [Complex64], shift: i64) {
    let n = buf.len() as i64;
    let s = shift.rem_euclid(n);
    if s == 0 {
        return;
    }
    for (i, z) in buf.iter_mut().enumerate() {
        // exact integer phase index keeps the rotation periodic on the grid
        let idx = (i as i64 * s) % n;
        let ph = 2.0 * PI * idx as f64 / n as f64;
        *z *= Complex64::from_polar(1.0, ph);
    }
}
