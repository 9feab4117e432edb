//! Normal-cluster calibration and confidence-window alarms.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::cluster::{Assignment, ClusterParams, StreamClusterer};
use crate::{Error, Result};

/// Macro-cluster ids formed by the training representations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalClusterSet {
    pub ids: BTreeSet<u64>,
    pub training_windows: usize,
    /// Stream time of the last training window.
    pub calibrated_at: f64,
}

impl NormalClusterSet {
    pub fn contains(&self, macro_id: u64) -> bool {
        self.ids.contains(&macro_id)
    }

    /// A window is abnormal when it joined a dense cluster outside the set.
    /// Outlier windows count as normal.
    pub fn is_abnormal(&self, a: &Assignment) -> bool {
        matches!(a.macro_id, Some(id) if !self.contains(id))
    }
}

/// Insert the training representations `(time, unit vector)` into a fresh
/// clusterer and take every macro-cluster present at the end as normal.
pub fn calibrate(training: &[(f64, Vec<f64>)], params: &ClusterParams) -> Result<(StreamClusterer, NormalClusterSet)> {
    let mut state = StreamClusterer::new(params.clone())?;
    if (training.len() as f64) < params.mu {
        return Err(Error::CalibrationFailed);
    }
    for (i, (t, r)) in training.iter().enumerate() {
        state.insert(r, *t, i)?;
    }
    let ids: BTreeSet<u64> = state.macro_clusters().into_iter().map(|m| m.id).collect();
    if ids.is_empty() {
        return Err(Error::CalibrationFailed);
    }
    let calibrated_at = training.last().map_or(0.0, |(t, _)| *t);
    Ok((state, NormalClusterSet { ids, training_windows: training.len(), calibrated_at }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Normal,
    Abnormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmEvent {
    pub time: f64,
    pub score: f64,
    pub window_id: usize,
}

/// Ring buffer of the last `k` verdicts with alarm hysteresis.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceState {
    k: usize,
    threshold: f64,
    buffer: VecDeque<Verdict>,
    armed: bool,
}

impl ConfidenceState {
    pub fn new(k: usize, threshold: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("confidence window k must be at least 1".into()));
        }
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::Config(format!("threshold must be in (0, 1], got {threshold}")));
        }
        Ok(Self { k, threshold, buffer: VecDeque::with_capacity(k), armed: true })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn is_armed(&self) -> bool {
        self.armed
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    /// Fraction of abnormal verdicts among the last `min(k, observed)`.
    pub fn score(&self) -> f64 {
        if self.buffer.is_empty() {
            return 0.0;
        }
        let abnormal = self.buffer.iter().filter(|v| **v == Verdict::Abnormal).count();
        abnormal as f64 / self.buffer.len() as f64
    }

    /// Push one verdict; returns the updated score and whether an alarm fires.
    pub fn push(&mut self, verdict: Verdict) -> (f64, bool) {
        if self.buffer.len() == self.k {
            self.buffer.pop_front();
        }
        self.buffer.push_back(verdict);
        let score = self.score();
        let fire = if score >= self.threshold {
            std::mem::replace(&mut self.armed, false)
        } else {
            self.armed = true;
            false
        };
        (score, fire)
    }

    pub fn reset(&mut self) {
        self.buffer.clear();
        self.armed = true;
    }
}

/// Classify one assignment against `normal` and advance the confidence state.
pub fn observe(
    assignment: &Assignment,
    normal: &NormalClusterSet,
    state: &mut ConfidenceState,
) -> (f64, Option<AlarmEvent>) {
    let verdict = if normal.is_abnormal(assignment) { Verdict::Abnormal } else { Verdict::Normal };
    let (score, fire) = state.push(verdict);
    let event = fire.then_some(AlarmEvent { time: assignment.stream_time, score, window_id: assignment.window_id });
    (score, event)
}

/// Per-window scores and alarms for a timed verdict sequence.
pub fn run_alarms(verdicts: &[(f64, usize, Verdict)], k: usize, threshold: f64) -> Result<(Vec<f64>, Vec<AlarmEvent>)> {
    let mut state = ConfidenceState::new(k, threshold)?;
    let mut scores = Vec::with_capacity(verdicts.len());
    let mut alarms = Vec::new();
    for &(time, window_id, v) in verdicts {
        let (score, fire) = state.push(v);
        scores.push(score);
        if fire {
            alarms.push(AlarmEvent { time, score, window_id });
        }
    }
    Ok((scores, alarms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use Verdict::{Abnormal as A, Normal as N};

    fn feed(state: &mut ConfidenceState, vs: &[Verdict]) -> Vec<(f64, bool)> {
        vs.iter().map(|v| state.push(*v)).collect()
    }

    #[test]
    fn three_of_five_fires() {
        let mut s = ConfidenceState::new(5, 0.5).unwrap();
        let out = feed(&mut s, &[N, N, A, A, A]);
        assert_eq!(out.last().unwrap().0, 0.6);
        assert_eq!(out.iter().filter(|o| o.1).count(), 1);
        // During warm-up the score is over the four observed verdicts, so
        // 2/4 already reaches the threshold.
        assert_eq!(out[3], (0.5, true));

        let mut s = ConfidenceState::new(5, 0.5).unwrap();
        let out = feed(&mut s, &[N, N, N, N, N, N, N, A, A, A]);
        assert_eq!(out[8], (0.4, false));
        assert_eq!(out[9], (0.6, true));
    }

    #[test]
    fn all_normal_never_fires() {
        let mut s = ConfidenceState::new(5, 0.5).unwrap();
        assert!(feed(&mut s, &[N; 50]).iter().all(|(sc, f)| *sc == 0.0 && !f));
    }

    #[test]
    fn hysteresis_blocks_repeat_alarms_until_dip() {
        let mut s = ConfidenceState::new(5, 0.5).unwrap();
        let out = feed(&mut s, &[A, A, A, A, A, A, A]);
        assert_eq!(out.iter().filter(|o| o.1).count(), 1);
        // dip below threshold re-arms
        let out = feed(&mut s, &[N, N, N, A, A, A]);
        assert!(out.iter().any(|(sc, _)| *sc < 0.5));
        assert_eq!(out.iter().filter(|o| o.1).count(), 1);
    }

    #[test]
    fn reset_clears_and_rearms() {
        let mut s = ConfidenceState::new(3, 0.5).unwrap();
        feed(&mut s, &[A, A]);
        assert!(!s.is_armed());
        s.reset();
        assert_eq!(s.buffer_len(), 0);
        assert!(s.is_armed());
        let snapshot = s.clone();
        s.reset();
        assert_eq!(s, snapshot);
        assert_eq!(s.push(N).0, 0.0);
    }

    #[test]
    fn warm_up_uses_observed_count() {
        let mut s = ConfidenceState::new(5, 0.5).unwrap();
        assert_eq!(s.push(A), (1.0, true));
    }

    #[test]
    fn invalid_parameters() {
        assert!(ConfidenceState::new(0, 0.5).is_err());
        assert!(ConfidenceState::new(3, 0.0).is_err());
        assert!(ConfidenceState::new(3, 1.5).is_err());
    }

    fn blob(center: &[f64], n: usize, spread: f64) -> Vec<(f64, Vec<f64>)> {
        (0..n)
            .map(|i| {
                let mut v = center.to_vec();
                v[2] += spread * ((i % 3) as f64 - 1.0);
                let nv = crate::linalg::norm(&v);
                (i as f64, v.iter().map(|x| x / nv).collect())
            })
            .collect()
    }

    #[test]
    fn calibrate_single_blob() {
        let (_, c) = calibrate(&blob(&[1.0, 0.0, 0.0], 10, 0.001), &ClusterParams::default()).unwrap();
        assert_eq!(c.ids.len(), 1);
        assert_eq!(c.training_windows, 10);
    }

    #[test]
    fn calibrate_two_blobs() {
        let mut pts = blob(&[1.0, 0.0, 0.0], 10, 0.001);
        pts.extend(blob(&[0.0, 1.0, 0.0], 10, 0.001).into_iter().map(|(t, v)| (t + 10.0, v)));
        let (_, c) = calibrate(&pts, &ClusterParams::default()).unwrap();
        assert_eq!(c.ids.len(), 2);
    }

    #[test]
    fn calibrate_needs_density() {
        let one = blob(&[1.0, 0.0, 0.0], 1, 0.0);
        assert!(matches!(calibrate(&one, &ClusterParams::default()), Err(Error::CalibrationFailed)));
        let sparse: Vec<(f64, Vec<f64>)> =
            (0..3).map(|i| (i as f64, { let mut v = vec![0.0; 3]; v[i] = 1.0; v })).collect();
        assert!(matches!(calibrate(&sparse, &ClusterParams::default()), Err(Error::CalibrationFailed)));
    }

    #[test]
    fn outliers_and_normal_clusters_are_not_abnormal() {
        let c = NormalClusterSet { ids: [3].into(), training_windows: 1, calibrated_at: 0.0 };
        let mk = |m| Assignment { window_id: 0, macro_id: m, micro_id: 0, stream_time: 0.0 };
        assert!(!c.is_abnormal(&mk(None)));
        assert!(!c.is_abnormal(&mk(Some(3))));
        assert!(c.is_abnormal(&mk(Some(4))));
        let mut s = ConfidenceState::new(1, 0.5).unwrap();
        let (_, ev) = observe(&mk(Some(4)), &c, &mut s);
        assert_eq!(ev.unwrap().score, 1.0);
    }
}
