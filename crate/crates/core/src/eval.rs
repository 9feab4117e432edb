//! Event-level and window-level scoring of alarm streams.
//!
//! Each decision point (window end time) is labeled *positive* if an event
//! onset follows within `pre_event_span`, *excluded* if it falls within
//! `post_event_exclusion` after an onset, and *negative* otherwise; positive
//! wins where the two overlap. Alarms in excluded regions are ignored.

use serde::{Deserialize, Serialize};

use crate::alarm::{run_alarms, AlarmEvent, Verdict};
use crate::autoencoder::{reconstruction_error, ModelParams};
use crate::signal::FeatureWindow;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Seconds before an onset in which an alarm counts as a true positive.
    pub pre_event_span: f64,
    /// Seconds after an onset that are left out of the evaluation.
    pub post_event_exclusion: f64,
    /// Leading fraction of each recording used for training.
    pub train_fraction: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { pre_event_span: 180.0, post_event_exclusion: 360.0, train_fraction: 1.0 / 3.0 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pre_event_span > 0.0) || !(self.post_event_exclusion > 0.0) {
            return Err(Error::Config("event spans must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!("train_fraction must be in (0, 1), got {}", self.train_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Positive,
    Negative,
    Excluded,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Positive => "positive",
            Region::Negative => "negative",
            Region::Excluded => "excluded",
        }
    }
}

/// Region of a single instant given sorted onsets.
pub fn region_at(t: f64, onsets: &[f64], cfg: &EvalConfig) -> Region {
    let next = onsets.partition_point(|&o| o <= t);
    if next < onsets.len() && t >= onsets[next] - cfg.pre_event_span {
        return Region::Positive;
    }
    if next > 0 && t < onsets[next - 1] + cfg.post_event_exclusion {
        return Region::Excluded;
    }
    Region::Negative
}

/// Index of the inter-event gap containing `t` (0 = before the first onset).
fn gap_index(t: f64, onsets: &[f64]) -> usize {
    onsets.partition_point(|&o| o <= t)
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

pub fn label_timeline(times: &[f64], onsets: &[f64], cfg: &EvalConfig) -> Vec<Region> {
    let onsets = sorted(onsets);
    times.iter().map(|&t| region_at(t, &onsets, cfg)).collect()
}

/// One evaluated decision point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPoint {
    pub time: f64,
    pub region: Region,
    pub score: f64,
    pub alarm: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTimeline {
    pub points: Vec<DecisionPoint>,
}

impl LabeledTimeline {
    pub fn build(times: &[f64], scores: &[f64], alarms: &[AlarmEvent], onsets: &[f64], cfg: &EvalConfig) -> Self {
        let labels = label_timeline(times, onsets, cfg);
        let mut alarm_times = sorted(&alarms.iter().map(|a| a.time).collect::<Vec<_>>());
        alarm_times.dedup();
        let points = times
            .iter()
            .zip(scores)
            .zip(labels)
            .map(|((&time, &score), region)| DecisionPoint {
                time,
                region,
                score,
                alarm: alarm_times.binary_search_by(|a| a.total_cmp(&time)).is_ok(),
            })
            .collect();
        Self { points }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventScore {
    pub recall: Option<f64>,
    /// Lead in minutes for each event (None when missed).
    pub leads_min: Vec<Option<f64>>,
    pub tp_alarms: usize,
}

/// Match alarms to the first onset that follows within `pre_event_span`.
pub fn score_events(alarm_times: &[f64], onsets: &[f64], cfg: &EvalConfig) -> EventScore {
    let onsets = sorted(onsets);
    let mut earliest: Vec<Option<f64>> = vec![None; onsets.len()];
    let mut tp_alarms = 0;
    for &a in alarm_times {
        let next = onsets.partition_point(|&o| o <= a);
        if next < onsets.len() && onsets[next] <= a + cfg.pre_event_span {
            tp_alarms += 1;
            let e = &mut earliest[next];
            *e = Some(e.map_or(a, |prev: f64| prev.min(a)));
        }
    }
    let leads_min: Vec<Option<f64>> =
        earliest.iter().zip(&onsets).map(|(e, o)| e.map(|a| (o - a) / 60.0)).collect();
    let detected = leads_min.iter().filter(|l| l.is_some()).count();
    let recall = (!onsets.is_empty()).then(|| detected as f64 / onsets.len() as f64);
    EventScore { recall, leads_min, tp_alarms }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeScore {
    pub instances: usize,
    pub true_negatives: usize,
    pub false_alarms: usize,
}

impl NegativeScore {
    pub fn specificity(&self) -> Result<f64> {
        if self.instances == 0 {
            return Err(Error::NoNegativeRegions);
        }
        Ok(self.true_negatives as f64 / self.instances as f64)
    }
}

/// One negative instance per inter-event gap that contains negative
/// decision points; it is a true negative when no alarm lands inside it.
pub fn score_negatives(alarm_times: &[f64], times: &[f64], onsets: &[f64], cfg: &EvalConfig) -> NegativeScore {
    let onsets = sorted(onsets);
    let mut gaps: Vec<usize> = times
        .iter()
        .filter(|&&t| region_at(t, &onsets, cfg) == Region::Negative)
        .map(|&t| gap_index(t, &onsets))
        .collect();
    gaps.sort_unstable();
    gaps.dedup();
    let mut voided: Vec<usize> = Vec::new();
    let mut false_alarms = 0;
    for &a in alarm_times {
        if region_at(a, &onsets, cfg) == Region::Negative {
            false_alarms += 1;
            voided.push(gap_index(a, &onsets));
        }
    }
    let true_negatives = gaps.iter().filter(|g| !voided.contains(g)).count();
    NegativeScore { instances: gaps.len(), true_negatives, false_alarms }
}

/// Mann-Whitney AUC of positive vs negative scores, ties counted as 1/2.
pub fn auc_from_scores(positives: &[f64], negatives: &[f64]) -> Result<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::AucUndefined(format!(
            "{} positive and {} negative points",
            positives.len(),
            negatives.len()
        )));
    }
    let mut all: Vec<(f64, bool)> =
        positives.iter().map(|&s| (s, true)).chain(negatives.iter().map(|&s| (s, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut u = 0.0;
    let mut neg_below = 0usize;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        let (mut pos_here, mut neg_here) = (0usize, 0usize);
        while j < all.len() && all[j].0.total_cmp(&all[i].0).is_eq() {
            if all[j].1 {
                pos_here += 1;
            } else {
                neg_here += 1;
            }
            j += 1;
        }
        u += pos_here as f64 * (neg_below as f64 + 0.5 * neg_here as f64);
        neg_below += neg_here;
        i = j;
    }
    Ok(u / (positives.len() as f64 * negatives.len() as f64))
}

/// AUC over per-window scores; excluded windows are dropped.
pub fn compute_auc(scores: &[f64], regions: &[Region]) -> Result<f64> {
    let pick = |r: Region| -> Vec<f64> {
        scores.iter().zip(regions).filter(|(_, &g)| g == r).map(|(&s, _)| s).collect()
    };
    auc_from_scores(&pick(Region::Positive), &pick(Region::Negative))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub events: usize,
    pub detected_events: usize,
    pub missed_events: usize,
    pub tp_alarms: usize,
    pub fp_alarms: usize,
    pub ignored_alarms: usize,
    pub negative_instances: usize,
    pub tn_instances: usize,
    pub positive_windows: usize,
    pub negative_windows: usize,
    pub excluded_windows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub auc: Option<f64>,
    pub mean_lead_min: Option<f64>,
    pub max_lead_min: Option<f64>,
    pub per_event_leads: Vec<Option<f64>>,
    pub counts: EvalCounts,
}

/// Onsets that fall inside the evaluated span `(first, last]`.
pub fn evaluated_onsets(times: &[f64], onsets: &[f64]) -> Vec<f64> {
    let (Some(first), Some(last)) = (
        times.iter().cloned().min_by(f64::total_cmp),
        times.iter().cloned().max_by(f64::total_cmp),
    ) else {
        return Vec::new();
    };
    sorted(onsets).into_iter().filter(|&o| o > first && o <= last).collect()
}

/// Full report for per-window `scores` at `times` and the emitted alarms.
///
/// `onsets` may include events outside the evaluated span; they shape the
/// region labels but only events inside the span count toward recall.
pub fn evaluate(times: &[f64], scores: &[f64], alarm_times: &[f64], onsets: &[f64], cfg: &EvalConfig) -> EvalReport {
    let all_onsets = sorted(onsets);
    let events = evaluated_onsets(times, &all_onsets);
    let regions = label_timeline(times, &all_onsets, cfg);
    let ev = score_events(alarm_times, &events, cfg);
    let neg = score_negatives(alarm_times, times, &all_onsets, cfg);
    let auc = compute_auc(scores, &regions).ok();

    let detected: Vec<f64> = ev.leads_min.iter().flatten().copied().collect();
    let mean_lead_min = (!detected.is_empty()).then(|| detected.iter().sum::<f64>() / detected.len() as f64);
    let max_lead_min = detected.iter().cloned().max_by(f64::total_cmp);
    let ignored = alarm_times
        .iter()
        .filter(|&&a| region_at(a, &all_onsets, cfg) == Region::Excluded)
        .count();
    let count = |r: Region| regions.iter().filter(|&&g| g == r).count();

    EvalReport {
        recall: ev.recall,
        specificity: neg.specificity().ok(),
        auc,
        mean_lead_min,
        max_lead_min,
        counts: EvalCounts {
            events: events.len(),
            detected_events: detected.len(),
            missed_events: events.len() - detected.len(),
            tp_alarms: ev.tp_alarms,
            fp_alarms: neg.false_alarms,
            ignored_alarms: ignored,
            negative_instances: neg.instances,
            tn_instances: neg.true_negatives,
            positive_windows: count(Region::Positive),
            negative_windows: count(Region::Negative),
            excluded_windows: count(Region::Excluded),
        },
        per_event_leads: ev.leads_min,
    }
}

/// Re-run only the alarm engine for each `k` over fixed verdicts.
pub fn sweep_confidence_window(
    ks: &[usize],
    verdicts: &[(f64, usize, Verdict)],
    threshold: f64,
    onsets: &[f64],
    cfg: &EvalConfig,
) -> Result<Vec<(usize, EvalReport)>> {
    let times: Vec<f64> = verdicts.iter().map(|v| v.0).collect();
    ks.iter()
        .map(|&k| {
            let (scores, alarms) = run_alarms(verdicts, k, threshold)?;
            let alarm_times: Vec<f64> = alarms.iter().map(|a| a.time).collect();
            Ok((k, evaluate(&times, &scores, &alarm_times, onsets, cfg)))
        })
        .collect()
}

/// Alarm times from a raw score stream with threshold crossing + hysteresis.
pub fn threshold_alarms(times: &[f64], scores: &[f64], threshold: f64) -> Vec<f64> {
    let mut armed = true;
    let mut out = Vec::new();
    for (&t, &s) in times.iter().zip(scores) {
        if s >= threshold {
            if armed {
                out.push(t);
                armed = false;
            }
        } else {
            armed = true;
        }
    }
    out
}

/// Reconstruction-error baseline: the per-window error is the score, alarms
/// come from thresholding it at `threshold`.
pub fn baseline_recon_eval(
    windows: &[FeatureWindow],
    params: &ModelParams,
    threshold: f64,
    onsets: &[f64],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let times: Vec<f64> = windows.iter().map(|w| w.end_time).collect();
    let errors = windows
        .iter()
        .map(|w| reconstruction_error(w, params))
        .collect::<Result<Vec<f64>>>()?;
    let alarms = threshold_alarms(&times, &errors, threshold);
    Ok(evaluate(&times, &errors, &alarms, onsets, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> EvalConfig {
        EvalConfig::default()
    }

    #[test]
    fn defaults_are_three_and_six_minutes() {
        let c = cfg();
        assert_eq!((c.pre_event_span, c.post_event_exclusion), (180.0, 360.0));
        assert!((c.train_fraction - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn labels_around_one_onset() {
        let times = [819.0, 820.0, 999.9, 1000.0, 1359.9, 1360.0];
        let l = label_timeline(&times, &[1000.0], &cfg());
        use Region::*;
        assert_eq!(l, vec![Negative, Positive, Positive, Excluded, Excluded, Negative]);
    }

    #[test]
    fn overlapping_spans_favor_next_event() {
        // onsets 400 s apart: exclusion [0, 360) overlaps positive [220, 400)
        let l = label_timeline(&[100.0, 219.0, 220.0, 300.0, 359.0, 399.0], &[0.0, 400.0], &cfg());
        use Region::*;
        assert_eq!(l, vec![Excluded, Excluded, Positive, Positive, Positive, Positive]);
    }

    #[test]
    fn no_onsets_all_negative() {
        assert!(label_timeline(&[1.0, 2.0, 3.0], &[], &cfg()).iter().all(|r| *r == Region::Negative));
    }

    #[test]
    fn lead_time_arithmetic() {
        let s = score_events(&[1000.0 - 88.0], &[1000.0], &cfg());
        assert_eq!(s.recall, Some(1.0));
        assert!((s.leads_min[0].unwrap() - 88.0 / 60.0).abs() < 1e-12);
        assert!((s.leads_min[0].unwrap() - 1.4667).abs() < 1e-3);
        let s = score_events(&[800.0], &[1000.0], &cfg());
        assert_eq!(s.recall, Some(0.0));
        assert_eq!(s.tp_alarms, 0);
        let s = score_events(&[], &[1000.0], &cfg());
        assert_eq!(s.recall, Some(0.0));
        assert!(s.leads_min.iter().all(Option::is_none));
    }

    #[test]
    fn one_alarm_one_event() {
        // alarm is within 180 s of both onsets; it maps to the nearer one
        let s = score_events(&[900.0], &[1000.0, 1050.0], &cfg());
        assert_eq!(s.tp_alarms, 1);
        assert_eq!(s.leads_min.iter().flatten().count(), 1);
    }

    #[test]
    fn specificity_counts_gaps() {
        let onsets = [1000.0, 2000.0, 3000.0, 4000.0];
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 100.0).collect();
        let n = score_negatives(&[1500.0], &times, &onsets, &cfg());
        // gaps before 1000, 1000-2000, 2000-3000, 3000-4000, after 4000
        assert_eq!(n.instances, 5);
        assert_eq!(n.true_negatives, 4);
        let inner: Vec<f64> = times.iter().cloned().filter(|&t| t > 1000.0 && t < 4500.0).collect();
        let n = score_negatives(&[1500.0], &inner, &onsets, &cfg());
        assert_eq!(n.instances, 4);
        assert_eq!(n.specificity().unwrap(), 0.75);
    }

    #[test]
    fn excluded_alarm_does_not_void() {
        let times: Vec<f64> = (0..40).map(|i| i as f64 * 100.0).collect();
        let n = score_negatives(&[1100.0], &times, &[1000.0], &cfg());
        assert_eq!(n.instances, 2);
        assert_eq!(n.true_negatives, 2);
        assert_eq!(n.specificity().unwrap(), 1.0);
    }

    #[test]
    fn no_negative_regions_is_reported() {
        let n = score_negatives(&[], &[950.0], &[1000.0], &cfg());
        assert!(matches!(n.specificity(), Err(Error::NoNegativeRegions)));
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_from_scores(&[0.9, 0.4], &[0.6, 0.1]).unwrap(), 0.75);
        assert_eq!(auc_from_scores(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), 1.0);
        assert_eq!(auc_from_scores(&[0.3; 4], &[0.3; 7]).unwrap(), 0.5);
        assert!(matches!(auc_from_scores(&[0.1], &[]), Err(Error::AucUndefined(_))));
    }

    #[test]
    fn report_for_perfect_detector() {
        let onsets = [1000.0, 2000.0];
        let times: Vec<f64> = (1..30).map(|i| i as f64 * 100.0).collect();
        let alarms = [900.0, 1900.0];
        let scores: Vec<f64> = times.iter().map(|t| if alarms.contains(t) { 1.0 } else { 0.0 }).collect();
        let r = evaluate(&times, &scores, &alarms, &onsets, &cfg());
        assert_eq!(r.recall, Some(1.0));
        assert_eq!(r.specificity, Some(1.0));
        assert_eq!(r.counts.tp_alarms, 2);
        assert_eq!(r.counts.fp_alarms, 0);
        assert!((r.mean_lead_min.unwrap() - 100.0 / 60.0).abs() < 1e-12);
        let total = r.counts.positive_windows + r.counts.negative_windows + r.counts.excluded_windows;
        assert_eq!(total, times.len());
    }

    #[test]
    fn sweep_single_k_matches_direct() {
        let verdicts: Vec<(f64, usize, Verdict)> = (0..40)
            .map(|i| {
                let t = i as f64 * 25.0;
                let v = if (i % 7) > 3 { Verdict::Abnormal } else { Verdict::Normal };
                (t, i, v)
            })
            .collect();
        let onsets = [500.0];
        let sweep = sweep_confidence_window(&[5], &verdicts, 0.5, &onsets, &cfg()).unwrap();
        let (scores, alarms) = run_alarms(&verdicts, 5, 0.5).unwrap();
        let times: Vec<f64> = verdicts.iter().map(|v| v.0).collect();
        let at: Vec<f64> = alarms.iter().map(|a| a.time).collect();
        assert_eq!(sweep[0].1, evaluate(&times, &scores, &at, &onsets, &cfg()));
    }

    #[test]
    fn threshold_alarms_use_hysteresis() {
        let t = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(threshold_alarms(&t, &[0.0, 2.0, 3.0, 0.0, 5.0], 1.0), vec![1.0, 4.0]);
    }
}
