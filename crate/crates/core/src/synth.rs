//! Deterministic synthetic heart-rate recordings with injected events.
//!
//! Normal RR variability is a sum of slowly amplitude-modulated sinusoids in
//! the 0.01–0.15 Hz band plus white jitter. Each event is a short bradycardia
//! episode whose first slow beat lands exactly on the onset; the `lead`
//! seconds before it carry one of the pre-event profiles.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::signal::EcgSeries;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    /// Power moves into a new low-frequency oscillation while the normal
    /// components fade.
    SpectralShift,
    /// The normal variability grows in amplitude.
    VarianceRamp,
    /// Abrupt short RR excursions.
    Spike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftProfile {
    pub kind: DriftKind,
    /// Seconds before the onset at which the profile starts.
    pub lead_sec: f64,
    /// Profile strength in seconds of RR (amplitude or spike height); for
    /// `VarianceRamp` a dimensionless gain.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub duration_sec: f64,
    pub base_hr_bpm: f64,
    /// `(frequency Hz, amplitude s)` of the normal RR oscillations.
    pub hrv_components: Vec<(f64, f64)>,
    /// Relative depth of the slow amplitude modulation of each component.
    pub hrv_modulation: f64,
    pub noise_sec: f64,
    pub event_count: usize,
    /// No events are placed before this time.
    pub quiet_lead_in_sec: f64,
    pub drift: DriftProfile,
    pub episode_beats: usize,
    pub episode_rr_sec: f64,
    /// Event spacing must exceed the sum of these two spans.
    pub pre_event_span: f64,
    pub post_event_exclusion: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            duration_sec: 6.0 * 3600.0,
            base_hr_bpm: 150.0,
            hrv_components: vec![(0.02, 0.012), (0.1, 0.008)],
            hrv_modulation: 0.05,
            noise_sec: 0.003,
            event_count: 10,
            quiet_lead_in_sec: 0.0,
            drift: DriftProfile { kind: DriftKind::SpectralShift, lead_sec: 120.0, magnitude: 0.03 },
            episode_beats: 6,
            episode_rr_sec: 0.75,
            pre_event_span: 180.0,
            post_event_exclusion: 360.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub beat_times: Vec<f64>,
    pub onsets: Vec<f64>,
    /// `[onset - lead, onset]` per event.
    pub drift_intervals: Vec<(f64, f64)>,
}

impl SynthSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: SynthSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.duration_sec > 0.0) || !(self.base_hr_bpm > 0.0) {
            return bad("duration and base heart rate must be positive".into());
        }
        if !(self.drift.lead_sec >= 0.0 && self.drift.lead_sec <= self.pre_event_span) {
            return bad(format!(
                "drift lead {} s must lie within the {} s pre-event span",
                self.drift.lead_sec, self.pre_event_span
            ));
        }
        if !(self.episode_rr_sec > 0.0) || !(self.noise_sec >= 0.0) {
            return bad("episode RR must be positive and noise non-negative".into());
        }
        if self.event_count > 0 && self.event_slot() <= self.pre_event_span + self.post_event_exclusion {
            return bad(format!(
                "{} events do not fit with more than {} s between them",
                self.event_count,
                self.pre_event_span + self.post_event_exclusion
            ));
        }
        Ok(())
    }

    fn placement_range(&self) -> (f64, f64) {
        let start = self.quiet_lead_in_sec + self.pre_event_span.max(self.drift.lead_sec) + 60.0;
        let end = self.duration_sec - self.post_event_exclusion - 60.0;
        (start, end)
    }

    fn event_slot(&self) -> f64 {
        let (a, b) = self.placement_range();
        (b - a) / self.event_count.max(1) as f64
    }

    fn plan_onsets(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let (start, _) = self.placement_range();
        let slot = self.event_slot();
        let min_sep = self.pre_event_span + self.post_event_exclusion + 1.0;
        let jitter = ((slot - min_sep) / 2.0).clamp(0.0, 0.25 * slot);
        (0..self.event_count)
            .map(|k| start + (k as f64 + 0.5) * slot + rng.random_range(-1.0..=1.0) * jitter)
            .collect()
    }
}

struct Component {
    freq: f64,
    amp: f64,
    phase: f64,
    mod_freq: f64,
    mod_phase: f64,
}

/// Generate beats, onsets and drift intervals for `spec`.
pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let onsets = spec.plan_onsets(&mut rng);
    let components: Vec<Component> = spec
        .hrv_components
        .iter()
        .map(|&(freq, amp)| Component {
            freq,
            amp,
            phase: rng.random_range(0.0..TAU),
            mod_freq: 1.0 / rng.random_range(600.0..1800.0),
            mod_phase: rng.random_range(0.0..TAU),
        })
        .collect();
    let drift_freq = 0.035;
    let noise = Normal::new(0.0, spec.noise_sec.max(1e-300)).expect("valid normal");
    let base_rr = 60.0 / spec.base_hr_bpm;

    // Spike times are drawn up front so the RR process stays a pure function of time.
    let spikes: Vec<Vec<f64>> = onsets
        .iter()
        .map(|&p| {
            let mut v = Vec::new();
            let mut t = p - spec.drift.lead_sec + rng.random_range(0.0..6.0);
            while t < p - 2.0 {
                v.push(t);
                t += rng.random_range(8.0..16.0);
            }
            v
        })
        .collect();

    let rr_at = |t: f64, rng: &mut ChaCha8Rng| -> f64 {
        let mut fade = 1.0;
        let mut extra = 0.0;
        let mut gain = 1.0;
        for (e, &p) in onsets.iter().enumerate() {
            let start = p - spec.drift.lead_sec;
            if t < start || t >= p || spec.drift.lead_sec <= 0.0 {
                continue;
            }
            let ramp = (t - start) / spec.drift.lead_sec;
            match spec.drift.kind {
                DriftKind::SpectralShift => {
                    fade = 1.0 - 0.7 * ramp;
                    extra += spec.drift.magnitude * ramp.sqrt() * (TAU * drift_freq * (t - start)).sin();
                }
                DriftKind::VarianceRamp => gain = 1.0 + spec.drift.magnitude * ramp,
                DriftKind::Spike => {
                    if spikes[e].iter().any(|&s| t >= s && t < s + 1.0) {
                        extra += spec.drift.magnitude;
                    }
                }
            }
        }
        let mut hrv = 0.0;
        for c in &components {
            let a = c.amp * (1.0 + spec.hrv_modulation * (TAU * c.mod_freq * t + c.mod_phase).sin());
            hrv += a * (TAU * c.freq * t + c.phase).sin();
        }
        let jitter = if spec.noise_sec > 0.0 { noise.sample(rng) } else { 0.0 };
        (base_rr + gain * fade * hrv + extra + gain * jitter).max(0.2)
    };

    let mut beats = vec![0.0];
    let mut next_event = 0usize;
    let mut t = 0.0;
    while t < spec.duration_sec {
        let mut rr = rr_at(t, &mut rng);
        if next_event < onsets.len() {
            let p = onsets[next_event];
            let land = p - spec.episode_rr_sec;
            if t + 4.0 * rr > land {
                // Spread the remaining time evenly so a beat lands on `land`.
                let n = ((land - t) / rr).round().max(1.0);
                rr = (land - t) / n;
                if n == 1.0 {
                    beats.push(land);
                    beats.push(p);
                    for k in 1..spec.episode_beats.max(2) {
                        beats.push(p + k as f64 * spec.episode_rr_sec);
                    }
                    t = *beats.last().unwrap();
                    next_event += 1;
                    continue;
                }
            }
        }
        t += rr;
        beats.push(t);
    }

    let drift_intervals = onsets.iter().map(|&p| (p - spec.drift.lead_sec, p)).collect();
    Ok(SynthOutput { beat_times: beats, onsets, drift_intervals })
}

/// Render an ECG with a Gaussian-bump QRS at each beat and optional white
/// noise at `snr_db` relative to the clean signal power.
pub fn ecg_from_beats(beat_times: &[f64], duration: f64, fs: f64, snr_db: Option<f64>, seed: u64) -> EcgSeries {
    let n = (duration * fs).round() as usize;
    let mut x = vec![0.0; n];
    // (offset s, amplitude mV, width s): Q, R, S, T
    let waves = [(-0.025, -0.12, 0.008), (0.0, 1.0, 0.010), (0.025, -0.2, 0.008), (0.16, 0.2, 0.035)];
    for &b in beat_times {
        for &(off, amp, width) in &waves {
            let c = b + off;
            let lo = (((c - 5.0 * width) * fs).floor().max(0.0)) as usize;
            let hi = (((c + 5.0 * width) * fs).ceil().max(0.0) as usize).min(n);
            for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
                let dt = i as f64 / fs - c;
                *v += amp * (-0.5 * (dt / width).powi(2)).exp();
            }
        }
    }
    if let Some(snr) = snr_db {
        let power = x.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64;
        let sd = (power / 10f64.powf(snr / 10.0)).sqrt();
        if sd > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, sd).expect("valid normal");
            x.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
        }
    }
    EcgSeries::new(fs, x, 0.0)
}
