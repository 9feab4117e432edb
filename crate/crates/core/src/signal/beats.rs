use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Single-lead ECG sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgSeries {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
    pub start_time: f64,
}

impl EcgSeries {
    pub fn new(sample_rate: f64, samples: Vec<f64>, start_time: f64) -> Self {
        Self { sample_rate, samples, start_time }
    }

    #[inline]
    pub fn time_of(&self, i: usize) -> f64 {
        self.start_time + i as f64 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// Beat timestamps and the RR intervals between them (the HRV signal).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BeatSeries {
    pub beat_times: Vec<f64>,
    pub rr: Vec<f64>,
}

impl BeatSeries {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.beat_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beat_times.is_empty()
    }

    /// Beats with `beat_time <= until`, as a fresh series.
    pub fn truncated(&self, until: f64) -> BeatSeries {
        let n = self.beat_times.partition_point(|&t| t <= until);
        BeatSeries {
            beat_times: self.beat_times[..n].to_vec(),
            rr: self.rr[..n.saturating_sub(1)].to_vec(),
        }
    }
}

pub fn rr_series(beat_times: &[f64]) -> Result<BeatSeries> {
    if beat_times.len() < 2 {
        return Err(Error::InsufficientBeats { needed: 2, got: beat_times.len() });
    }
    let mut rr = Vec::with_capacity(beat_times.len() - 1);
    for (i, w) in beat_times.windows(2).enumerate() {
        let d = w[1] - w[0];
        // `!(d > 0)` also rejects NaN.
        if !(d > 0.0) || !w[0].is_finite() || !w[1].is_finite() {
            return Err(Error::NonMonotoneBeats(i + 1));
        }
        rr.push(d);
    }
    Ok(BeatSeries { beat_times: beat_times.to_vec(), rr })
}

/// Start time of every maximal run of at least `min_beats` consecutive beats
/// whose instantaneous heart rate `60 / rr` is below `hr_threshold_bpm`.
///
/// The interval `rr[i]` belongs to the beat that closes it, `beat_times[i + 1]`.
pub fn derive_bradycardia_onsets(beats: &BeatSeries, hr_threshold_bpm: f64, min_beats: usize) -> Vec<f64> {
    let min_beats = min_beats.max(1);
    let mut onsets = Vec::new();
    let mut run_start: Option<usize> = None;
    let mut run_len = 0usize;
    let flush = |start: Option<usize>, len: usize, onsets: &mut Vec<f64>| {
        if let Some(s) = start {
            if len >= min_beats {
                onsets.push(beats.beat_times[s + 1]);
            }
        }
    };
    for (i, &rr) in beats.rr.iter().enumerate() {
        if 60.0 / rr < hr_threshold_bpm {
            if run_start.is_none() {
                run_start = Some(i);
                run_len = 0;
            }
            run_len += 1;
        } else {
            flush(run_start.take(), run_len, &mut onsets);
            run_len = 0;
        }
    }
    flush(run_start, run_len, &mut onsets);
    onsets
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beats_from_rr(rr: &[f64]) -> BeatSeries {
        let mut t = vec![0.0];
        for r in rr {
            t.push(t.last().unwrap() + r);
        }
        rr_series(&t).unwrap()
    }

    #[test]
    fn rr_of_uniform_beats() {
        let b = rr_series(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(b.rr, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn rr_direct_differences() {
        let b = rr_series(&[0.0, 0.4, 1.0]).unwrap();
        assert!((b.rr[0] - 0.4).abs() < 1e-12);
        assert!((b.rr[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn rr_at_100_bpm() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.6).collect();
        let b = rr_series(&times).unwrap();
        assert!(b.rr.iter().all(|r| (r - 0.6).abs() < 1e-9));
    }

    #[test]
    fn rr_rejects_non_monotone() {
        assert!(matches!(rr_series(&[0.0, 1.0, 1.0]), Err(Error::NonMonotoneBeats(2))));
        assert!(matches!(rr_series(&[0.0, 2.0, 1.0]), Err(Error::NonMonotoneBeats(2))));
        assert!(matches!(rr_series(&[0.0, f64::NAN]), Err(Error::NonMonotoneBeats(1))));
        assert!(matches!(rr_series(&[0.0]), Err(Error::InsufficientBeats { .. })));
    }

    #[test]
    fn bradycardia_run_of_two() {
        let b = beats_from_rr(&[0.5, 0.5, 0.7, 0.7, 0.5]);
        let onsets = derive_bradycardia_onsets(&b, 100.0, 2);
        // first 0.7 s interval is rr[2], closed by beat 3
        assert_eq!(onsets, vec![b.beat_times[3]]);
        assert!((onsets[0] - 1.7).abs() < 1e-12);
    }

    #[test]
    fn bradycardia_none_at_120_bpm() {
        let b = beats_from_rr(&[0.5; 20]);
        assert!(derive_bradycardia_onsets(&b, 100.0, 2).is_empty());
    }

    #[test]
    fn bradycardia_isolated_beat_ignored() {
        let b = beats_from_rr(&[0.5, 0.5, 0.8, 0.5, 0.5]);
        assert!(derive_bradycardia_onsets(&b, 100.0, 2).is_empty());
    }

    #[test]
    fn bradycardia_run_at_end_and_two_runs() {
        let b = beats_from_rr(&[0.7, 0.7, 0.5, 0.5, 0.7, 0.8, 0.9]);
        let onsets = derive_bradycardia_onsets(&b, 100.0, 2);
        assert_eq!(onsets, vec![b.beat_times[1], b.beat_times[5]]);
        assert!(derive_bradycardia_onsets(&BeatSeries::empty(), 100.0, 2).is_empty());
    }

    #[test]
    fn truncation_keeps_rr_consistent() {
        let b = beats_from_rr(&[0.5; 10]);
        let t = b.truncated(2.0);
        assert_eq!(t.beat_times.len(), 5);
        assert_eq!(t.rr.len(), 4);
    }
}
