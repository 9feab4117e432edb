//! Pan-Tompkins style QRS detection.
//!
//! Zero-phase band-pass (5–25 Hz), centered derivative, squaring, centered
//! moving-window integration, then adaptive signal/noise peak thresholds with
//! a 200 ms refractory period and RR-based search-back. Integration peaks are
//! refined to the band-passed extremum so the returned times sit on the R wave.

use super::beats::{BeatSeries, EcgSeries};
use crate::{Error, Result};

const MIN_DURATION_SEC: f64 = 2.0;
const MIN_SAMPLE_RATE: f64 = 100.0;
const REFRACTORY_SEC: f64 = 0.2;
const INTEGRATION_SEC: f64 = 0.15;
const REFINE_SEC: f64 = 0.08;

pub fn detect_r_peaks(ecg: &EcgSeries) -> Result<BeatSeries> {
    let fs = ecg.sample_rate;
    if !(fs >= MIN_SAMPLE_RATE) {
        return Err(Error::InsufficientSignal(format!(
            "sample rate {fs} Hz below {MIN_SAMPLE_RATE} Hz"
        )));
    }
    if ecg.duration() < MIN_DURATION_SEC {
        return Err(Error::InsufficientSignal(format!(
            "{:.3} s of samples, need {MIN_DURATION_SEC} s",
            ecg.duration()
        )));
    }

    let mean = ecg.samples.iter().sum::<f64>() / ecg.samples.len() as f64;
    let centered: Vec<f64> = ecg.samples.iter().map(|v| v - mean).collect();
    let bp = bandpass(&centered, fs);

    let n = bp.len();
    let mut energy = vec![0.0; n];
    for i in 1..n.saturating_sub(1) {
        let d = (bp[i + 1] - bp[i - 1]) * fs * 0.5;
        energy[i] = d * d;
    }
    let mwi = centered_moving_average(&energy, ((INTEGRATION_SEC * fs).round() as usize).max(1));

    let peak_max = mwi.iter().cloned().fold(0.0, f64::max);
    if !(peak_max > 0.0) || peak_max < 1e-20 {
        return Ok(BeatSeries::empty());
    }

    let candidates = local_maxima(&mwi);
    let refractory = (REFRACTORY_SEC * fs).round() as usize;
    let accepted = adaptive_threshold(&mwi, &candidates, fs, refractory);

    // Refine each integration peak to the band-passed extremum.
    let half = (REFINE_SEC * fs).round() as usize;
    let mut refined: Vec<(f64, f64)> = Vec::with_capacity(accepted.len());
    for &p in &accepted {
        let lo = p.saturating_sub(half);
        let hi = (p + half + 1).min(n);
        let (mut best, mut best_abs) = (p, -1.0);
        for (i, v) in bp.iter().enumerate().take(hi).skip(lo) {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        let pos = best as f64 + parabolic_offset(&bp, best);
        let t = ecg.start_time + pos / fs;
        match refined.last_mut() {
            Some(last) if t - last.0 < REFRACTORY_SEC => {
                if best_abs > last.1 {
                    *last = (t, best_abs);
                }
            }
            _ => refined.push((t, best_abs)),
        }
    }

    let times: Vec<f64> = refined.into_iter().map(|(t, _)| t).collect();
    match times.len() {
        0 => Ok(BeatSeries::empty()),
        1 => Ok(BeatSeries { beat_times: times, rr: Vec::new() }),
        _ => super::beats::rr_series(&times),
    }
}

/// Threshold pass over the integration-waveform peaks; returns sample indices.
fn adaptive_threshold(mwi: &[f64], candidates: &[usize], fs: f64, refractory: usize) -> Vec<usize> {
    let learn = ((2.0 * fs) as usize).min(mwi.len());
    let init_max = mwi[..learn].iter().cloned().fold(0.0, f64::max);
    let init_mean = mwi[..learn].iter().sum::<f64>() / learn as f64;
    let mut spki = 0.25 * init_max;
    let mut npki = 0.5 * init_mean;
    let mut threshold = npki + 0.25 * (spki - npki);

    let mut beats: Vec<usize> = Vec::new();
    let mut rr_recent: Vec<usize> = Vec::new();

    for (ci, &p) in candidates.iter().enumerate() {
        let v = mwi[p];
        if v > threshold {
            match beats.last().copied() {
                Some(last) if p - last < refractory => {
                    if v > mwi[last] {
                        *beats.last_mut().unwrap() = p;
                    }
                }
                prev => {
                    if let Some(last) = prev {
                        // Search-back for a beat missed in an unusually long gap.
                        if rr_recent.len() >= 2 {
                            let avg = rr_recent.iter().sum::<usize>() as f64 / rr_recent.len() as f64;
                            if (p - last) as f64 > 1.66 * avg {
                                let missed = candidates[..ci]
                                    .iter()
                                    .copied()
                                    .filter(|&q| q > last + refractory && q + refractory < p)
                                    .filter(|&q| mwi[q] > 0.5 * threshold)
                                    .max_by(|&a, &b| mwi[a].total_cmp(&mwi[b]));
                                if let Some(q) = missed {
                                    spki = 0.25 * mwi[q] + 0.75 * spki;
                                    push_rr(&mut rr_recent, q - last);
                                    beats.push(q);
                                }
                            }
                        }
                        push_rr(&mut rr_recent, p - beats.last().copied().unwrap_or(last));
                    }
                    beats.push(p);
                }
            }
            spki = 0.125 * v + 0.875 * spki;
        } else {
            npki = 0.125 * v + 0.875 * npki;
        }
        threshold = npki + 0.25 * (spki - npki);
    }
    beats
}

fn push_rr(recent: &mut Vec<usize>, rr: usize) {
    recent.push(rr);
    if recent.len() > 8 {
        recent.remove(0);
    }
}

fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 1..x.len().saturating_sub(1) {
        if x[i] > x[i - 1] && x[i] >= x[i + 1] && x[i] > 0.0 {
            out.push(i);
        }
    }
    out
}

fn parabolic_offset(x: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= x.len() {
        return 0.0;
    }
    let (a, b, c) = (x[i - 1].abs(), x[i].abs(), x[i + 1].abs());
    let denom = a - 2.0 * b + c;
    if denom.abs() < 1e-300 {
        0.0
    } else {
        (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
    }
}

fn centered_moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let n = x.len();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + x[i];
    }
    let half = width / 2;
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Second-order section, transposed direct form II.
#[derive(Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    // RBJ cookbook Butterworth sections (Q = 1/sqrt(2)).
    fn lowpass(fc: f64, fs: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * fc / fs;
        let alpha = w0.sin() / std::f64::consts::SQRT_2;
        let cw = w0.cos();
        let a0 = 1.0 + alpha;
        Self {
            b: [(1.0 - cw) / 2.0 / a0, (1.0 - cw) / a0, (1.0 - cw) / 2.0 / a0],
            a: [-2.0 * cw / a0, (1.0 - alpha) / a0],
        }
    }

    fn highpass(fc: f64, fs: f64) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * fc / fs;
        let alpha = w0.sin() / std::f64::consts::SQRT_2;
        let cw = w0.cos();
        let a0 = 1.0 + alpha;
        Self {
            b: [(1.0 + cw) / 2.0 / a0, -(1.0 + cw) / a0, (1.0 + cw) / 2.0 / a0],
            a: [-2.0 * cw / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &mut [f64]) {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let inp = *v;
            let out = self.b[0] * inp + z1;
            z1 = self.b[1] * inp - self.a[0] * out + z2;
            z2 = self.b[2] * inp - self.a[1] * out;
            *v = out;
        }
    }
}

fn bandpass(x: &[f64], fs: f64) -> Vec<f64> {
    let hi = 25.0_f64.min(0.45 * fs);
    let sections = [Biquad::highpass(5.0, fs), Biquad::lowpass(hi, fs)];
    let mut y = x.to_vec();
    for s in &sections {
        s.run(&mut y);
    }
    y.reverse();
    for s in &sections {
        s.run(&mut y);
    }
    y.reverse();
    y
}
