use serde::{Deserialize, Serialize};

use crate::linalg::Mat;
use crate::{Error, Result};

/// A run of consecutive beats and their feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    pub window_id: usize,
    /// Half-open beat index range `[start, end)`.
    pub beat_start: usize,
    pub beat_end: usize,
    /// `len x d_in` feature matrix.
    pub features: Mat,
    /// Time of the first covered beat.
    pub start_time: f64,
    /// Time of the last covered beat.
    pub end_time: f64,
}

impl FeatureWindow {
    /// Window with synthetic bookkeeping; used by tests and tools that feed
    /// the auto-encoder directly.
    pub fn from_features(window_id: usize, features: Mat) -> Self {
        let len = features.rows();
        Self {
            window_id,
            beat_start: 0,
            beat_end: len,
            features,
            start_time: 0.0,
            end_time: 0.0,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.features.cols()
    }
}

/// Cut per-beat features into windows `[k*stride, k*stride + window_len)`.
/// A trailing partial window is dropped.
pub fn segment_windows(
    features: &Mat,
    beat_times: &[f64],
    window_len: usize,
    stride: usize,
) -> Result<Vec<FeatureWindow>> {
    if window_len < 2 {
        return Err(Error::Config(format!("window_len must be >= 2, got {window_len}")));
    }
    if stride < 1 {
        return Err(Error::Config("stride must be >= 1".into()));
    }
    if features.rows() != beat_times.len() {
        return Err(Error::DimensionMismatch { expected: beat_times.len(), got: features.rows() });
    }
    let n = features.rows();
    let d = features.cols();
    let mut out = Vec::new();
    let mut start = 0usize;
    while start + window_len <= n {
        let end = start + window_len;
        let data = features.as_slice()[start * d..end * d].to_vec();
        out.push(FeatureWindow {
            window_id: out.len(),
            beat_start: start,
            beat_end: end,
            features: Mat::from_vec(window_len, d, data),
            start_time: beat_times[start],
            end_time: beat_times[end - 1],
        });
        start += stride;
    }
    Ok(out)
}

/// Per-channel z-scoring fitted on training windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Channels whose fitted spread was zero; their std is forced to 1.
    pub constant: Vec<bool>,
}

pub fn fit_scaler(windows: &[FeatureWindow]) -> Result<FeatureScaler> {
    let first = windows.first().ok_or(Error::NoTrainingData)?;
    let d = first.dim();
    let mut count = 0usize;
    let mut mean = vec![0.0; d];
    for w in windows {
        if w.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: w.dim() });
        }
        for r in 0..w.len() {
            for (m, v) in mean.iter_mut().zip(w.features.row(r)) {
                *m += v;
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::NoTrainingData);
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    let mut var = vec![0.0; d];
    for w in windows {
        for r in 0..w.len() {
            for ((s, v), m) in var.iter_mut().zip(w.features.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
    }
    let mut std = Vec::with_capacity(d);
    let mut constant = Vec::with_capacity(d);
    for s in var {
        let sd = (s / count as f64).sqrt();
        if sd > 0.0 && sd.is_finite() {
            std.push(sd);
            constant.push(false);
        } else {
            std.push(1.0);
            constant.push(true);
        }
    }
    Ok(FeatureScaler { mean, std, constant })
}

impl FeatureScaler {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, window: &FeatureWindow) -> Result<FeatureWindow> {
        self.map(window, |v, m, s| (v - m) / s)
    }

    pub fn invert(&self, window: &FeatureWindow) -> Result<FeatureWindow> {
        self.map(window, |v, m, s| v * s + m)
    }

    fn map(&self, window: &FeatureWindow, f: impl Fn(f64, f64, f64) -> f64) -> Result<FeatureWindow> {
        if window.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: window.dim() });
        }
        let mut out = window.clone();
        for r in 0..out.len() {
            for ((v, m), s) in out.features.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = f(*v, *m, *s);
            }
        }
        Ok(out)
    }
}

pub fn apply_scaler(scaler: &FeatureScaler, window: &FeatureWindow) -> Result<FeatureWindow> {
    scaler.apply(window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(n: usize, d: usize) -> (Mat, Vec<f64>) {
        let data = (0..n * d).map(|i| i as f64).collect();
        (Mat::from_vec(n, d, data), (0..n).map(|i| i as f64 * 0.5).collect())
    }

    #[test]
    fn windows_cover_expected_ranges() {
        let (f, t) = ramp(200, 3);
        let w = segment_windows(&f, &t, 64, 64).unwrap();
        let ranges: Vec<_> = w.iter().map(|w| (w.beat_start, w.beat_end)).collect();
        assert_eq!(ranges, vec![(0, 64), (64, 128), (128, 192)]);
        assert_eq!(w[1].end_time, t[127]);
        assert_eq!(w[2].features.row(0), f.row(128));
    }

    #[test]
    fn exact_single_window_and_short_input() {
        let (f, t) = ramp(64, 2);
        assert_eq!(segment_windows(&f, &t, 64, 64).unwrap().len(), 1);
        let (f, t) = ramp(63, 2);
        assert!(segment_windows(&f, &t, 64, 64).unwrap().is_empty());
    }

    #[test]
    fn default_window_is_64_beats() {
        assert_eq!(crate::config::PipelineConfig::default().window_len, 64);
    }

    #[test]
    fn overlapping_stride() {
        let (f, t) = ramp(10, 1);
        let w = segment_windows(&f, &t, 4, 2).unwrap();
        assert_eq!(w.len(), 4);
        assert_eq!((w[3].beat_start, w[3].beat_end), (6, 10));
        assert!(segment_windows(&f, &t, 1, 1).is_err());
        assert!(segment_windows(&f, &t, 4, 0).is_err());
    }

    #[test]
    fn scaler_two_point_channel() {
        let w = FeatureWindow::from_features(0, Mat::from_rows(&[vec![0.0, 5.0], vec![2.0, 5.0]]));
        let s = fit_scaler(std::slice::from_ref(&w)).unwrap();
        assert_eq!(s.mean, vec![1.0, 5.0]);
        assert_eq!(s.std, vec![1.0, 1.0]);
        assert_eq!(s.constant, vec![false, true]);
        let z = s.apply(&w).unwrap();
        assert_eq!(z.features.as_slice(), &[-1.0, 0.0, 1.0, 0.0]);
        assert_eq!(s.apply(&w).unwrap(), z);
    }

    #[test]
    fn scaler_needs_data() {
        assert!(matches!(fit_scaler(&[]), Err(Error::NoTrainingData)));
    }

    proptest! {
        #[test]
        fn scaler_inverts(values in proptest::collection::vec(-1e3f64..1e3, 12..60)) {
            let rows = values.len() / 3;
            let m = Mat::from_vec(rows, 3, values[..rows * 3].to_vec());
            let w = FeatureWindow::from_features(0, m);
            let s = fit_scaler(std::slice::from_ref(&w)).unwrap();
            let back = s.invert(&s.apply(&w).unwrap()).unwrap();
            for (a, b) in back.features.as_slice().iter().zip(w.features.as_slice()) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn windows_have_exact_length(n in 0usize..300, len in 2usize..70, stride in 1usize..70) {
            let (f, t) = ramp(n, 2);
            let ws = segment_windows(&f, &t, len, stride).unwrap();
            let expected = if n >= len { (n - len) / stride + 1 } else { 0 };
            prop_assert_eq!(ws.len(), expected);
            for w in &ws {
                prop_assert_eq!(w.beat_end - w.beat_start, len);
                prop_assert_eq!(w.end_time, t[w.beat_end - 1]);
            }
        }
    }
}
