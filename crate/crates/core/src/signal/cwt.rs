//! Morlet continuous wavelet transform of the RR series.
//!
//! The irregularly sampled RR series is linearly interpolated onto a uniform
//! grid, mean-removed, transformed at log-spaced scales, and the coefficient
//! magnitudes are read back at each beat time.
//!
//! Wavelet: `psi(t) = pi^(-1/4) exp(i w0 t) exp(-t^2 / 2)`, coefficients
//! `W(s, b) = (1/s) sum_n x[n] conj(psi((t_n - b) / s)) dt`. With the `1/s`
//! normalization a sinusoid of amplitude `A` at the centre frequency of scale
//! `s` yields `|W| ~ A pi^(-1/4) sqrt(pi/2)` at every scale. The pseudo-frequency
//! of scale `s` is `w0 / (2 pi s)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::beats::BeatSeries;
use crate::linalg::Mat;
use crate::{Error, Result};

pub const MIN_BEATS: usize = 32;
/// Kernel half-width in units of scale (the Gaussian envelope is below 2e-8 there).
const SUPPORT_SIGMAS: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CwtConfig {
    pub f_min: f64,
    pub f_max: f64,
    pub n_scales: usize,
    pub omega0: f64,
    pub resample_rate: f64,
}

impl Default for CwtConfig {
    fn default() -> Self {
        Self { f_min: 0.01, f_max: 0.15, n_scales: 8, omega0: 6.0, resample_rate: 4.0 }
    }
}

impl CwtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_min > 0.0 && self.f_min < self.f_max) {
            return Err(Error::InvalidBand(format!(
                "need 0 < f_min < f_max, got [{}, {}]",
                self.f_min, self.f_max
            )));
        }
        if !(self.resample_rate > 2.0 * self.f_max) {
            return Err(Error::InvalidBand(format!(
                "f_max {} Hz at or above Nyquist of {} Hz resampling",
                self.f_max, self.resample_rate
            )));
        }
        if self.n_scales == 0 {
            return Err(Error::Config("n_scales must be at least 1".into()));
        }
        if !(self.omega0 >= 5.0) {
            return Err(Error::Config(format!("omega0 must be >= 5, got {}", self.omega0)));
        }
        Ok(())
    }

    /// Centre frequencies, ascending from `f_min` to `f_max`, log-spaced.
    pub fn frequencies(&self) -> Vec<f64> {
        if self.n_scales == 1 {
            return vec![(self.f_min * self.f_max).sqrt()];
        }
        let ratio = (self.f_max / self.f_min).ln();
        (0..self.n_scales)
            .map(|k| self.f_min * (ratio * k as f64 / (self.n_scales - 1) as f64).exp())
            .collect()
    }

    /// Scales in seconds matching [`frequencies`](Self::frequencies).
    pub fn scales(&self) -> Vec<f64> {
        self.frequencies().iter().map(|f| self.omega0 / (2.0 * PI * f)).collect()
    }

    /// Ratio between adjacent centre frequencies.
    pub fn scale_step(&self) -> f64 {
        if self.n_scales < 2 {
            1.0
        } else {
            (self.f_max / self.f_min).powf(1.0 / (self.n_scales - 1) as f64)
        }
    }
}

/// Morlet mother wavelet.
#[inline]
pub fn morlet(t: f64, omega0: f64) -> Complex64 {
    let env = PI.powf(-0.25) * (-0.5 * t * t).exp();
    Complex64::new(env * (omega0 * t).cos(), env * (omega0 * t).sin())
}

/// Per-beat magnitudes plus the intermediate uniform-grid data.
#[derive(Debug, Clone)]
pub struct CwtOutput {
    /// `n_beats x n_scales`, column `k` is the scale for `frequencies()[k]`.
    pub magnitudes: Mat,
    pub frequencies: Vec<f64>,
    pub grid_start: f64,
    pub grid_dt: f64,
}

/// Linear interpolation of the RR series onto a uniform grid.
///
/// `rr[i]` is placed at the beat that closes it; values are held constant
/// outside the first and last such point. Returns `(grid_start, samples)`.
pub fn resample_rr(beats: &BeatSeries, rate: f64) -> (f64, Vec<f64>) {
    let t0 = beats.beat_times[0];
    let t_end = *beats.beat_times.last().unwrap();
    let n = ((t_end - t0) * rate).floor() as usize + 1;
    let xs = &beats.beat_times[1..];
    let ys = &beats.rr;
    let mut out = Vec::with_capacity(n);
    let mut j = 0usize;
    for g in 0..n {
        let t = t0 + g as f64 / rate;
        while j + 1 < xs.len() && xs[j + 1] < t {
            j += 1;
        }
        let v = if t <= xs[0] {
            ys[0]
        } else if j + 1 >= xs.len() {
            *ys.last().unwrap()
        } else {
            let (xa, xb) = (xs[j], xs[j + 1]);
            let w = ((t - xa) / (xb - xa)).clamp(0.0, 1.0);
            ys[j] + w * (ys[j + 1] - ys[j])
        };
        out.push(v);
    }
    (t0, out)
}

/// CWT of a uniformly sampled signal at the given scales (seconds).
///
/// Computed as a zero-padded FFT convolution; equal to the direct truncated
/// sum up to rounding. Returns one coefficient row per scale.
pub fn uniform_cwt(signal: &[f64], dt: f64, scales: &[f64], omega0: f64) -> Vec<Vec<Complex64>> {
    let n = signal.len();
    if n == 0 {
        return vec![Vec::new(); scales.len()];
    }
    let max_half = scales
        .iter()
        .map(|s| kernel_half_width(*s, dt, n))
        .max()
        .unwrap_or(0);
    let size = (n + max_half + 1).next_power_of_two();

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);

    let mut x_hat: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    x_hat.resize(size, Complex64::new(0.0, 0.0));
    fwd.process(&mut x_hat);

    scales
        .iter()
        .map(|&s| {
            let half = kernel_half_width(s, dt, n) as isize;
            // g[m] = psi(m dt / s) dt / s, so W = x (*) g.
            let mut g = vec![Complex64::new(0.0, 0.0); size];
            for m in -half..=half {
                let idx = m.rem_euclid(size as isize) as usize;
                g[idx] = morlet(m as f64 * dt / s, omega0) * (dt / s);
            }
            fwd.process(&mut g);
            for (gi, xi) in g.iter_mut().zip(&x_hat) {
                *gi *= xi;
            }
            inv.process(&mut g);
            let norm = 1.0 / size as f64;
            g.truncate(n);
            g.iter_mut().for_each(|v| *v *= norm);
            g
        })
        .collect()
}

fn kernel_half_width(scale: f64, dt: f64, n: usize) -> usize {
    ((SUPPORT_SIGMAS * scale / dt).ceil() as usize).min(n.saturating_sub(1))
}

pub fn morlet_cwt(beats: &BeatSeries, cfg: &CwtConfig) -> Result<CwtOutput> {
    cfg.validate()?;
    if beats.len() < MIN_BEATS {
        return Err(Error::InsufficientBeats { needed: MIN_BEATS, got: beats.len() });
    }
    let (grid_start, mut grid) = resample_rr(beats, cfg.resample_rate);
    let mean = grid.iter().sum::<f64>() / grid.len() as f64;
    grid.iter_mut().for_each(|v| *v -= mean);

    let dt = 1.0 / cfg.resample_rate;
    let coeffs = uniform_cwt(&grid, dt, &cfg.scales(), cfg.omega0);

    let mut magnitudes = Mat::zeros(beats.len(), cfg.n_scales);
    let last = grid.len() - 1;
    for (k, row) in coeffs.iter().enumerate() {
        for (b, &t) in beats.beat_times.iter().enumerate() {
            let pos = ((t - grid_start) / dt).max(0.0);
            let i = (pos.floor() as usize).min(last);
            let j = (i + 1).min(last);
            let w = (pos - i as f64).clamp(0.0, 1.0);
            let v = row[i].norm() * (1.0 - w) + row[j].norm() * w;
            magnitudes.set(b, k, v);
        }
    }
    Ok(CwtOutput { magnitudes, frequencies: cfg.frequencies(), grid_start, grid_dt: dt })
}
