//! End-to-end orchestration: training on the first part of a recording,
//! streaming detection over the rest, and artifact persistence.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alarm::{calibrate, observe, AlarmEvent, ConfidenceState, NormalClusterSet, Verdict};
use crate::autoencoder::{encode, reconstruction_error, train, unit_normalize, ModelParams};
use crate::cluster::{SnapshotRow, StreamClusterer};
use crate::config::{FeatureContext, PipelineConfig};
use crate::eval::{self, EvalReport};
use crate::io::WindowRecord;
use crate::linalg::Mat;
use crate::signal::{fit_scaler, morlet_cwt, segment_windows, BeatSeries, FeatureScaler, FeatureWindow};
use crate::{Error, Result};

pub const MODEL_FILE: &str = "model.nhep";
pub const SCALER_FILE: &str = "scaler.json";
pub const NORMAL_FILE: &str = "normal_clusters.json";

/// Start of the test span: `train_fraction` of the way through the beats.
pub fn training_boundary(beats: &BeatSeries, train_fraction: f64) -> Result<f64> {
    let (Some(&first), Some(&last)) = (beats.beat_times.first(), beats.beat_times.last()) else {
        return Err(Error::InsufficientBeats { needed: 2, got: beats.beat_times.len() });
    };
    Ok(first + train_fraction * (last - first))
}

/// Windows over the whole beat series, in time order.
pub fn feature_windows(beats: &BeatSeries, cfg: &PipelineConfig) -> Result<Vec<FeatureWindow>> {
    match cfg.feature_context {
        FeatureContext::Global => {
            let cwt = morlet_cwt(beats, &cfg.cwt)?;
            segment_windows(&cwt.magnitudes, &beats.beat_times, cfg.window_len, cfg.stride)
        }
        FeatureContext::Trailing => trailing_windows(beats, cfg),
    }
}

/// Same index ranges as the global segmentation, but each window's
/// features come from a transform over `trailing_context_sec` of history
/// ending at its last beat.
fn trailing_windows(beats: &BeatSeries, cfg: &PipelineConfig) -> Result<Vec<FeatureWindow>> {
    let (len, n) = (cfg.window_len, beats.len());
    let starts: Vec<usize> = (0..).map(|k| k * cfg.stride).take_while(|s| s + len <= n).collect();
    starts
        .par_iter()
        .enumerate()
        .map(|(id, &start)| {
            let end = start + len;
            let t_end = beats.beat_times[end - 1];
            let from = beats.beat_times.partition_point(|&t| t < t_end - cfg.trailing_context_sec).min(start);
            let sub = BeatSeries { beat_times: beats.beat_times[from..end].to_vec(), rr: beats.rr[from..end - 1].to_vec() };
            let cwt = morlet_cwt(&sub, &cfg.cwt)?;
            let d = cwt.magnitudes.cols();
            let rows = cwt.magnitudes.as_slice()[(start - from) * d..].to_vec();
            Ok(FeatureWindow {
                window_id: id,
                beat_start: start,
                beat_end: end,
                features: Mat::from_vec(len, d, rows),
                start_time: beats.beat_times[start],
                end_time: t_end,
            })
        })
        .collect()
}

/// True when `[start, end]` touches no `[onset - pre, onset + post]` margin.
pub fn clear_of_events(start: f64, end: f64, onsets: &[f64], cfg: &PipelineConfig) -> bool {
    onsets.iter().all(|&o| end < o - cfg.eval.pre_event_span || start > o + cfg.eval.post_event_exclusion)
}

fn scale_all(scaler: &FeatureScaler, windows: &[FeatureWindow]) -> Result<Vec<FeatureWindow>> {
    windows.iter().map(|w| scaler.apply(w)).collect()
}

fn representation(window: &FeatureWindow, params: &ModelParams) -> Result<Vec<f64>> {
    Ok(unit_normalize(&encode(window, params)?)?.values)
}

/// Everything `detect` needs besides the model weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalArtifact {
    pub config_hash: String,
    pub train_boundary_sec: f64,
    pub baseline_threshold: f64,
    pub normal: NormalClusterSet,
    pub clusterer: StreamClusterer,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalerArtifact {
    pub config_hash: String,
    pub scaler: FeatureScaler,
}

#[derive(Debug, Clone)]
pub struct TrainedPipeline {
    pub params: ModelParams,
    pub scaler: ScalerArtifact,
    pub normal: NormalArtifact,
    pub epoch_losses: Vec<f64>,
}

/// Scaler and auto-encoder fitted on the training span, with the training
/// windows' representations and reconstruction errors.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub params: ModelParams,
    pub scaler: FeatureScaler,
    pub train_boundary_sec: f64,
    pub representations: Vec<(f64, Vec<f64>)>,
    pub train_errors: Vec<f64>,
    pub epoch_losses: Vec<f64>,
}

/// Fit the scaler and auto-encoder.
///
/// Only beats before the boundary are read. Training windows must end
/// before it and stay clear of every event margin.
pub fn fit_model(beats: &BeatSeries, onsets: &[f64], cfg: &PipelineConfig) -> Result<FittedModel> {
    cfg.validate()?;
    let boundary = training_boundary(beats, cfg.eval.train_fraction)?;
    let visible = beats.truncated(boundary);
    let windows: Vec<FeatureWindow> = feature_windows(&visible, cfg)?
        .into_iter()
        .filter(|w| w.end_time < boundary && clear_of_events(w.start_time, w.end_time, onsets, cfg))
        .collect();
    if windows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let scaler = fit_scaler(&windows)?;
    let scaled = scale_all(&scaler, &windows)?;
    let outcome = train(&scaled, cfg.d_hidden, &cfg.train_config())?;
    let params = outcome.params;

    let mut representations = Vec::with_capacity(scaled.len());
    let mut train_errors = Vec::with_capacity(scaled.len());
    for w in &scaled {
        representations.push((w.end_time, representation(w, &params)?));
        train_errors.push(reconstruction_error(w, &params)?);
    }
    Ok(FittedModel {
        params,
        scaler,
        train_boundary_sec: boundary,
        representations,
        train_errors,
        epoch_losses: outcome.epoch_losses,
    })
}

/// Fit the model and calibrate the normal clusters.
pub fn train_pipeline(beats: &BeatSeries, onsets: &[f64], cfg: &PipelineConfig) -> Result<TrainedPipeline> {
    TrainedPipeline::from_fitted(fit_model(beats, onsets, cfg)?, cfg)
}

impl TrainedPipeline {
    /// Calibrate the normal clusters of an already fitted model under `cfg`.
    pub fn from_fitted(m: FittedModel, cfg: &PipelineConfig) -> Result<Self> {
        let (clusterer, normal) = calibrate(&m.representations, &cfg.cluster)?;
        let hash = cfg.hash();
        Ok(TrainedPipeline {
            normal: NormalArtifact {
                config_hash: hash.clone(),
                train_boundary_sec: m.train_boundary_sec,
                baseline_threshold: quantile(&m.train_errors, cfg.baseline_quantile),
                normal,
                clusterer,
            },
            scaler: ScalerArtifact { config_hash: hash, scaler: m.scaler },
            params: m.params,
            epoch_losses: m.epoch_losses,
        })
    }
}

/// Scaled windows starting at or after the training boundary.
pub fn test_windows(beats: &BeatSeries, boundary: f64, scaler: &FeatureScaler, cfg: &PipelineConfig) -> Result<Vec<FeatureWindow>> {
    let test: Vec<FeatureWindow> = feature_windows(beats, cfg)?
        .into_iter()
        .filter(|w| w.start_time >= boundary)
        .collect();
    scale_all(scaler, &test)
}

/// Reconstruction-error baseline report for a fitted model, independent of
/// clustering.
pub fn baseline_report(beats: &BeatSeries, model: &FittedModel, onsets: &[f64], cfg: &PipelineConfig) -> Result<EvalReport> {
    let windows = test_windows(beats, model.train_boundary_sec, &model.scaler, cfg)?;
    let threshold = quantile(&model.train_errors, cfg.baseline_quantile);
    eval::baseline_recon_eval(&windows, &model.params, threshold, onsets, &cfg.eval)
}

fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub records: Vec<WindowRecord>,
    pub alarms: Vec<AlarmEvent>,
    pub snapshot: Vec<SnapshotRow>,
}

impl Detection {
    pub fn verdicts(&self) -> Vec<(f64, usize, Verdict)> {
        verdicts_of(&self.records)
    }
}

pub fn verdicts_of(records: &[WindowRecord]) -> Vec<(f64, usize, Verdict)> {
    records.iter().map(|r| (r.time_sec, r.window_id, r.verdict)).collect()
}

/// Stream the windows starting at or after the training boundary through
/// encode, clustering and the confidence window.
///
/// The wavelet transform runs over the whole recording, so features near a
/// window's edges see a few wavelet widths of surrounding signal.
pub fn detect(beats: &BeatSeries, trained: &TrainedPipeline, cfg: &PipelineConfig) -> Result<Detection> {
    cfg.validate()?;
    if trained.params.d_in != cfg.cwt.n_scales || trained.params.d_hidden != cfg.d_hidden {
        return Err(Error::IncompatibleModel(format!(
            "model dims ({}, {}) do not match config ({}, {})",
            trained.params.d_in, trained.params.d_hidden, cfg.cwt.n_scales, cfg.d_hidden
        )));
    }
    let scaled = test_windows(beats, trained.normal.train_boundary_sec, &trained.scaler.scaler, cfg)?;

    let mut clusterer = trained.normal.clusterer.clone();
    let mut state = ConfidenceState::new(cfg.k, cfg.threshold)?;
    let mut records = Vec::with_capacity(scaled.len());
    let mut alarms = Vec::new();
    for w in &scaled {
        let rep = representation(w, &trained.params)?;
        let a = clusterer.insert(&rep, w.end_time, w.window_id)?;
        let verdict = if trained.normal.normal.is_abnormal(&a) { Verdict::Abnormal } else { Verdict::Normal };
        let (score, alarm) = observe(&a, &trained.normal.normal, &mut state);
        alarms.extend(alarm);
        records.push(WindowRecord {
            window_id: w.window_id,
            time_sec: w.end_time,
            micro_id: a.micro_id,
            macro_id: a.macro_id,
            verdict,
            score,
            recon_error: reconstruction_error(w, &trained.params)?,
        });
    }
    Ok(Detection { records, alarms, snapshot: clusterer.snapshot() })
}

/// Cluster-method report from a detection log.
pub fn evaluate_detection(records: &[WindowRecord], alarms: &[AlarmEvent], onsets: &[f64], cfg: &PipelineConfig) -> EvalReport {
    let times: Vec<f64> = records.iter().map(|r| r.time_sec).collect();
    let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
    let alarm_times: Vec<f64> = alarms.iter().map(|a| a.time).collect();
    eval::evaluate(&times, &scores, &alarm_times, onsets, &cfg.eval)
}

/// Reconstruction-error baseline over the same detection log.
pub fn evaluate_baseline(records: &[WindowRecord], threshold: f64, onsets: &[f64], cfg: &PipelineConfig) -> EvalReport {
    let times: Vec<f64> = records.iter().map(|r| r.time_sec).collect();
    let errors: Vec<f64> = records.iter().map(|r| r.recon_error).collect();
    let alarms = eval::threshold_alarms(&times, &errors, threshold);
    eval::evaluate(&times, &errors, &alarms, onsets, &cfg.eval)
}

impl TrainedPipeline {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        crate::autoencoder::write_model_file(&self.params, &dir.join(MODEL_FILE))?;
        write_json(&dir.join(SCALER_FILE), &self.scaler)?;
        write_json(&dir.join(NORMAL_FILE), &self.normal)?;
        Ok(())
    }

    /// Load artifacts from `dir`. A config-hash mismatch is an error unless
    /// `force` is set.
    pub fn load(dir: &Path, cfg: &PipelineConfig, force: bool) -> Result<Self> {
        let params = crate::autoencoder::read_model_file(&dir.join(MODEL_FILE))?;
        let scaler: ScalerArtifact = read_json(&dir.join(SCALER_FILE))?;
        let normal: NormalArtifact = read_json(&dir.join(NORMAL_FILE))?;
        let hash = cfg.hash();
        if !force {
            for (name, h) in [(SCALER_FILE, &scaler.config_hash), (NORMAL_FILE, &normal.config_hash)] {
                if *h != hash {
                    return Err(Error::IncompatibleModel(format!(
                        "{name} was built with config {h}, current config is {hash}"
                    )));
                }
            }
        }
        if scaler.scaler.dim() != params.d_in {
            return Err(Error::IncompatibleModel(format!(
                "scaler has {} channels, model expects {}",
                scaler.scaler.dim(),
                params.d_in
            )));
        }
        Ok(Self { params, scaler, normal, epoch_losses: Vec::new() })
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::IncompatibleModel(format!("{}: {e}", path.display())))
}
