//! Pipeline configuration: TOML on disk, defaults from the reference setup.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autoencoder::TrainConfig;
use crate::cluster::ClusterParams;
use crate::eval::EvalConfig;
use crate::signal::CwtConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub window_len: usize,
    pub stride: usize,
    pub d_hidden: usize,
    /// Confidence window size.
    pub k: usize,
    /// Abnormal fraction that raises an alarm.
    pub threshold: f64,
    /// Event rule used when onsets are derived from the beats.
    pub hr_threshold_bpm: f64,
    pub brady_min_beats: usize,
    /// Quantile of training reconstruction errors used as the baseline alarm level.
    pub baseline_quantile: f64,
    /// Where each window's wavelet features come from.
    pub feature_context: FeatureContext,
    /// Seconds of history used per window with `FeatureContext::Trailing`.
    pub trailing_context_sec: f64,
    pub cwt: CwtConfig,
    pub train: TrainConfig,
    pub cluster: ClusterParams,
    pub eval: EvalConfig,
}

/// Placement of the wavelet transform relative to the windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureContext {
    /// One transform over the whole recording. Low-frequency scales at a
    /// window's end see up to a few wavelet widths of later signal.
    Global,
    /// A separate transform per window over the trailing context ending at
    /// the window's last beat, so no window sees later beats.
    Trailing,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            window_len: 64,
            stride: 64,
            d_hidden: 32,
            k: 5,
            threshold: 0.5,
            hr_threshold_bpm: 100.0,
            brady_min_beats: 2,
            baseline_quantile: 0.99,
            feature_context: FeatureContext::Global,
            trailing_context_sec: 600.0,
            cwt: CwtConfig::default(),
            train: TrainConfig::default(),
            cluster: ClusterParams::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 {
            return Err(Error::Config(format!("window_len must be >= 2, got {}", self.window_len)));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be >= 1".into()));
        }
        if self.d_hidden == 0 {
            return Err(Error::Config("d_hidden must be >= 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::Config(format!("threshold must be in (0, 1], got {}", self.threshold)));
        }
        if !(self.hr_threshold_bpm > 0.0) || self.brady_min_beats == 0 {
            return Err(Error::Config("event rule needs a positive rate and beat count".into()));
        }
        if !(self.baseline_quantile > 0.0 && self.baseline_quantile <= 1.0) {
            return Err(Error::Config("baseline_quantile must be in (0, 1]".into()));
        }
        if !(self.trailing_context_sec > 0.0) {
            return Err(Error::Config("trailing_context_sec must be positive".into()));
        }
        self.cwt.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.train.validate()?;
        self.cluster.validate()?;
        self.eval.validate()?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Training settings with the pipeline seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.train.clone() }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canonical.as_bytes());
        hex::encode(h.finalize())
    }
}
